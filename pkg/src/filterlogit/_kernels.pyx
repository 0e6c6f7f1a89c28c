# cython: language_level=3
"""Compiled kernels: weighted split scans and level-indexed design products.

Semantics are identical to ``_pykernels``; see that module for the contracts.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, NAN

cnp.import_array()

DEF GINI = 0
DEF TIE_EPS = 1e-12


cdef inline double _xlogx(double x) nogil:
    return x * log(x) if x > 0.0 else 0.0


cdef inline double _phi(double p, int crit) nogil:
    if crit == GINI:
        return 2.0 * p * (1.0 - p)
    return -_xlogx(p) - _xlogx(1.0 - p)


cdef int _scan(const double[::1] xs, const double[::1] y, const double[::1] w,
               Py_ssize_t lo, Py_ssize_t hi, int crit, double[::1] gains,
               double* cut_out, double* gain_out) nogil:
    """Fills gains[lo:hi] for candidate positions; returns right-child start or -1."""
    cdef Py_ssize_t i, last, first_cand
    cdef double N = 0.0, P = 0.0, nl = 0.0, pl = 0.0, nr, pr, g, best, parent
    cdef Py_ssize_t n_present = 0
    for i in range(lo, hi):
        if w[i] > 0.0:
            N += w[i]
            P += w[i] * y[i]
            n_present += 1
    if n_present < 2:
        return -1
    if crit != GINI:
        parent = _phi(P / N, crit)
    # gains[k] holds the gain of cutting right after present index k (or -inf)
    last = -1
    best = -1.0
    for i in range(lo, hi):
        if w[i] <= 0.0:
            continue
        if last >= 0:
            if xs[last] < xs[i]:
                nr = N - nl
                pr = P - pl
                if crit == GINI:
                    g = (2.0 / N) * (P * (N - P) / N - pl * (nl - pl) / nl - pr * (nr - pr) / nr)
                else:
                    g = parent - (nl / N) * _phi(pl / nl, crit) - (nr / N) * _phi(pr / nr, crit)
                gains[i] = g
                if g > best:
                    best = g
            else:
                gains[i] = -1.0
        nl += w[i]
        pl += w[i] * y[i]
        last = i
    if not best > TIE_EPS:
        return -1
    last = -1
    for i in range(lo, hi):
        if w[i] <= 0.0:
            continue
        if last >= 0 and xs[last] < xs[i] and gains[i] >= best - TIE_EPS:
            cut_out[0] = 0.5 * (xs[last] + xs[i])
            gain_out[0] = gains[i]
            return i
        last = i
    return -1


def split_scan(const double[::1] xs, const double[::1] y01, const double[::1] w,
               Py_ssize_t lo, Py_ssize_t hi, int crit):
    cdef double cut = NAN, gain = 0.0
    cdef double[::1] gains = np.empty(xs.shape[0])
    cdef int pos
    with nogil:
        pos = _scan(xs, y01, w, lo, hi, crit, gains, &cut, &gain)
    if pos < 0:
        return NAN, 0.0, -1
    return cut, gain, pos


cdef Py_ssize_t _marginal(const double[::1] xs, const double[::1] y, const double[::1] w,
                          Py_ssize_t k_splits, int crit, double[::1] gains,
                          Py_ssize_t[:, ::1] reg, double[:, ::1] rinfo,
                          double[::1] cuts_out) nogil:
    """Best-first splitting; reg rows are (lo, hi, pos), rinfo rows (cut, gain)."""
    cdef Py_ssize_t n = xs.shape[0], n_reg = 1, n_cuts = 0, r, best_r, k, lo, hi, pos
    cdef double best_gain, cut, gain, tmp
    reg[0, 0] = 0
    reg[0, 1] = n
    cut = NAN
    gain = 0.0
    reg[0, 2] = _scan(xs, y, w, 0, n, crit, gains, &cut, &gain)
    rinfo[0, 0] = cut
    rinfo[0, 1] = gain
    while n_cuts < k_splits:
        best_r = -1
        best_gain = 0.0
        for r in range(n_reg):
            if reg[r, 2] >= 0 and rinfo[r, 1] > best_gain:
                best_r = r
                best_gain = rinfo[r, 1]
        if best_r < 0:
            break
        lo = reg[best_r, 0]
        hi = reg[best_r, 1]
        pos = reg[best_r, 2]
        cuts_out[n_cuts] = rinfo[best_r, 0]
        n_cuts += 1
        # shift later regions right by one to keep left-to-right order
        for r in range(n_reg, best_r + 1, -1):
            reg[r, 0] = reg[r - 1, 0]
            reg[r, 1] = reg[r - 1, 1]
            reg[r, 2] = reg[r - 1, 2]
            rinfo[r, 0] = rinfo[r - 1, 0]
            rinfo[r, 1] = rinfo[r - 1, 1]
        n_reg += 1
        cut = NAN
        gain = 0.0
        reg[best_r, 0] = lo
        reg[best_r, 1] = pos
        reg[best_r, 2] = _scan(xs, y, w, lo, pos, crit, gains, &cut, &gain)
        rinfo[best_r, 0] = cut
        rinfo[best_r, 1] = gain
        cut = NAN
        gain = 0.0
        reg[best_r + 1, 0] = pos
        reg[best_r + 1, 1] = hi
        reg[best_r + 1, 2] = _scan(xs, y, w, pos, hi, crit, gains, &cut, &gain)
        rinfo[best_r + 1, 0] = cut
        rinfo[best_r + 1, 1] = gain
    # insertion sort; n_cuts is small
    for r in range(1, n_cuts):
        tmp = cuts_out[r]
        k = r - 1
        while k >= 0 and cuts_out[k] > tmp:
            cuts_out[k + 1] = cuts_out[k]
            k -= 1
        cuts_out[k + 1] = tmp
    return n_cuts


def marginal_cuts(const double[::1] xs, const double[::1] y01, const double[::1] w,
                  Py_ssize_t k_splits, int crit):
    cdef Py_ssize_t n = xs.shape[0], m
    cdef double[::1] gains = np.empty(n)
    cdef Py_ssize_t[:, ::1] reg = np.empty((k_splits + 1, 3), dtype=np.intp)
    cdef double[:, ::1] rinfo = np.empty((k_splits + 1, 2))
    out = np.empty(k_splits)
    cdef double[::1] out_v = out
    with nogil:
        m = _marginal(xs, y01, w, k_splits, crit, gains, reg, rinfo, out_v)
    return out[:m].copy()


def column_cuts(const double[:, ::1] xs_cols, const double[:, ::1] y_cols,
                const double[:, ::1] w_cols, Py_ssize_t k_splits, int crit):
    cdef Py_ssize_t p = xs_cols.shape[0], n = xs_cols.shape[1], j, m, k
    out = np.full((p, k_splits), np.nan)
    cdef double[:, ::1] out_v = out
    cdef double[::1] gains = np.empty(n)
    cdef Py_ssize_t[:, ::1] reg = np.empty((k_splits + 1, 3), dtype=np.intp)
    cdef double[:, ::1] rinfo = np.empty((k_splits + 1, 2))
    cdef double[::1] buf = np.empty(k_splits)
    with nogil:
        for j in range(p):
            m = _marginal(xs_cols[j], y_cols[j], w_cols[j], k_splits, crit, gains, reg, rinfo, buf)
            for k in range(m):
                out_v[j, k] = buf[k]
    return out


def level_matvec(const int[:, ::1] levels, const double[:, ::1] table):
    cdef Py_ssize_t n = levels.shape[0], p = levels.shape[1], i, j
    out = np.zeros(n)
    cdef double[::1] f = out
    cdef double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(p):
                acc += table[j, levels[i, j]]
            f[i] = acc
    return out


def level_sums(const int[:, ::1] levels, const double[::1] r, Py_ssize_t n_levels):
    cdef Py_ssize_t n = levels.shape[0], p = levels.shape[1], i, j
    out = np.zeros((p, n_levels))
    cdef double[:, ::1] S = out
    cdef double ri
    with nogil:
        for i in range(n):
            ri = r[i]
            for j in range(p):
                S[j, levels[i, j]] += ri
    return out


def cd_quadratic(const double[::1, :] A, const double[::1] w, const double[::1] g,
                 double[::1] x, const double[::1] x0, const double[::1] pen,
                 double lam, Py_ssize_t max_pass, double tol):
    """Cyclic coordinate descent on a weighted quadratic model with l1 penalty.

    Minimizes g.(x - x0) + (1/2n) sum_i w_i (A_i (x - x0))^2 + lam sum_k pen_k |x_k|
    over x in place. Returns the number of passes.
    """
    cdef Py_ssize_t n = A.shape[0], m = A.shape[1], i, k, npass = 0
    cdef double[::1] q = np.zeros(n)
    cdef double[::1] h = np.zeros(m)
    cdef double gk, hk, u, thr, new, delta, max_change, acc
    with nogil:
        for k in range(m):
            acc = 0.0
            for i in range(n):
                acc += w[i] * A[i, k] * A[i, k]
            h[k] = acc / n
        for i in range(n):
            q[i] = 0.0
        for k in range(m):
            delta = x[k] - x0[k]
            if delta != 0.0:
                for i in range(n):
                    q[i] += A[i, k] * delta
        while npass < max_pass:
            npass += 1
            max_change = 0.0
            for k in range(m):
                hk = h[k]
                if hk <= 0.0:
                    continue
                acc = 0.0
                for i in range(n):
                    acc += A[i, k] * w[i] * q[i]
                gk = g[k] + acc / n
                u = hk * x[k] - gk
                thr = lam * pen[k]
                if u > thr:
                    new = (u - thr) / hk
                elif u < -thr:
                    new = (u + thr) / hk
                else:
                    new = 0.0
                delta = new - x[k]
                if delta != 0.0:
                    for i in range(n):
                        q[i] += A[i, k] * delta
                    x[k] = new
                    if hk * delta * delta > max_change:
                        max_change = hk * delta * delta
            if max_change < tol:
                break
    return npass


cdef Py_ssize_t _upper(const double[::1] v, double x) nogil:
    # first index with v[i] > x
    cdef Py_ssize_t lo = 0, hi = v.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if v[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef void _isort(double* c, Py_ssize_t k) nogil:
    cdef Py_ssize_t r, j
    cdef double t
    for r in range(1, k):
        t = c[r]
        j = r - 1
        while j >= 0 and c[j] > t:
            c[j + 1] = c[j]
            j -= 1
        c[j + 1] = t


cdef double _lloyd_step(const double[::1] v, const double[::1] cs, const double[::1] cs2,
                        double* c, double* s1, double* cnt, Py_ssize_t k) nogil:
    cdef Py_ssize_t m, lo = 0, hi
    cdef double a, b, sse = 0.0
    for m in range(k):
        if m < k - 1:
            hi = _upper(v, 0.5 * (c[m] + c[m + 1]))
        else:
            hi = v.shape[0]
        if hi < lo:
            hi = lo
        a = cs[hi] - cs[lo]
        b = cs2[hi] - cs2[lo]
        s1[m] = a
        cnt[m] = <double>(hi - lo)
        sse += b - 2.0 * c[m] * a + c[m] * c[m] * cnt[m]
        lo = hi
    return sse


def kmeans_1d(const double[::1] v, Py_ssize_t k, const double[:, ::1] u, Py_ssize_t max_iter, double tol):
    cdef Py_ssize_t n = v.shape[0], r, m, i, it, idx
    cdef Py_ssize_t n_init = u.shape[0]
    cs_a = np.zeros(n + 1)
    cs2_a = np.zeros(n + 1)
    cdef double[::1] cs = cs_a, cs2 = cs2_a
    cdef double[::1] d2 = np.empty(n), cd = np.empty(n)
    c_a = np.empty(k)
    best_a = np.empty(k)
    cdef double[::1] c = c_a, best = best_a
    cdef double[::1] s1 = np.empty(k), cnt = np.empty(k)
    cdef double best_sse = np.inf, sse, tot, target, shift, nc, diff
    with nogil:
        for i in range(n):
            cs[i + 1] = cs[i] + v[i]
            cs2[i + 1] = cs2[i] + v[i] * v[i]
        for r in range(n_init):
            idx = <Py_ssize_t>(u[r, 0] * n)
            if idx > n - 1:
                idx = n - 1
            c[0] = v[idx]
            for i in range(n):
                d2[i] = (v[i] - c[0]) * (v[i] - c[0])
            for m in range(1, k):
                tot = 0.0
                for i in range(n):
                    tot += d2[i]
                    cd[i] = tot
                if tot <= 0.0:
                    idx = <Py_ssize_t>(u[r, m] * n)
                else:
                    target = u[r, m] * tot
                    idx = _upper(cd, target)
                if idx > n - 1:
                    idx = n - 1
                c[m] = v[idx]
                for i in range(n):
                    diff = (v[i] - c[m]) * (v[i] - c[m])
                    if diff < d2[i]:
                        d2[i] = diff
            for it in range(max_iter):
                _isort(&c[0], k)
                _lloyd_step(v, cs, cs2, &c[0], &s1[0], &cnt[0], k)
                shift = 0.0
                for m in range(k):
                    if cnt[m] > 0:
                        nc = s1[m] / cnt[m]
                    else:
                        nc = c[m]
                    diff = nc - c[m] if nc > c[m] else c[m] - nc
                    if diff > shift:
                        shift = diff
                    c[m] = nc
                if shift < tol:
                    break
            _isort(&c[0], k)
            sse = _lloyd_step(v, cs, cs2, &c[0], &s1[0], &cnt[0], k)
            if sse < best_sse - 1e-15:
                best_sse = sse
                for m in range(k):
                    best[m] = c[m]
    return best_a, best_sse
