"""NumPy implementations of the hot kernels.

Semantics match ``_kernels.pyx`` exactly; this module is used when the
compiled extension is unavailable or ``FILTERLOGIT_BACKEND=python``.
"""

import numpy as np

GINI = 0
ENTROPY = 1
GAIN_TIE_EPS = 1e-12


def _xlogx(x):
    out = np.zeros_like(x)
    m = x > 0
    out[m] = x[m] * np.log(x[m])
    return out


def _impurity(p, crit):
    if crit == GINI:
        return 2.0 * p * (1.0 - p)
    return -_xlogx(p) - _xlogx(1.0 - p)


def split_scan(xs, y01, w, lo, hi, crit):
    """Best cut of the sorted slice [lo, hi) under weights ``w``.

    Returns ``(cut, gain, pos)`` where ``pos`` is the first index of the right
    child; ``pos == -1`` signals that no positive-gain cut exists.
    """
    xs_r = xs[lo:hi]
    w_r = w[lo:hi]
    present = np.flatnonzero(w_r > 0)
    if present.size < 2:
        return np.nan, 0.0, -1
    xp = xs_r[present]
    wp = w_r[present]
    yp = y01[lo:hi][present] * wp
    cand = np.flatnonzero(xp[:-1] < xp[1:])
    if cand.size == 0:
        return np.nan, 0.0, -1
    cn = np.cumsum(wp)
    cy = np.cumsum(yp)
    N = cn[-1]
    P = cy[-1]
    nl = cn[cand]
    pl = cy[cand]
    nr = N - nl
    pr = P - pl
    if crit == GINI:
        gain = (2.0 / N) * (P * (N - P) / N - pl * (nl - pl) / nl - pr * (nr - pr) / nr)
    else:
        parent = _impurity(np.array([P / N]), crit)[0]
        gain = parent - (nl / N) * _impurity(pl / nl, crit) - (nr / N) * _impurity(pr / nr, crit)
    best = gain.max()
    if not best > GAIN_TIE_EPS:
        return np.nan, 0.0, -1
    k = int(np.flatnonzero(gain >= best - GAIN_TIE_EPS)[0])
    i = cand[k]
    cut = 0.5 * (xp[i] + xp[i + 1])
    return float(cut), float(gain[k]), int(lo + present[i + 1])


def marginal_cuts(xs, y01, w, k_splits, crit):
    """Best-first recursive partitioning of one sorted covariate.

    Splits the region with the largest best-gain until ``k_splits`` cuts are
    placed or no region has a positive-gain cut. Returns cuts sorted ascending.
    """
    n = xs.shape[0]
    regions = [(0, n) + split_scan(xs, y01, w, 0, n, crit)]
    cuts = []
    while len(cuts) < k_splits:
        best_r = -1
        best_gain = 0.0
        for r, (_, _, cut, gain, pos) in enumerate(regions):
            if pos >= 0 and gain > best_gain:
                best_r, best_gain = r, gain
        if best_r < 0:
            break
        lo, hi, cut, gain, pos = regions.pop(best_r)
        cuts.append(cut)
        regions.insert(best_r, (pos, hi) + split_scan(xs, y01, w, pos, hi, crit))
        regions.insert(best_r, (lo, pos) + split_scan(xs, y01, w, lo, pos, crit))
    return np.sort(np.array(cuts, dtype=np.float64))


def column_cuts(xs_cols, y_cols, w_cols, k_splits, crit):
    """``marginal_cuts`` over the rows of (p, n) presorted arrays; NaN-padded."""
    p = xs_cols.shape[0]
    out = np.full((p, k_splits), np.nan)
    for j in range(p):
        c = marginal_cuts(xs_cols[j], y_cols[j], w_cols[j], k_splits, crit)
        out[j, : c.size] = c
    return out


def level_matvec(levels, table):
    """f[i] = sum_j table[j, levels[i, j]]."""
    p = levels.shape[1]
    if p == 0:
        return np.zeros(levels.shape[0])
    return table[np.arange(p), levels].sum(axis=1)


def level_sums(levels, r, n_levels):
    """S[j, l] = sum of r[i] over samples with levels[i, j] == l."""
    n, p = levels.shape
    flat = (levels + np.arange(p, dtype=levels.dtype) * n_levels).ravel()
    return np.bincount(flat, weights=np.repeat(r, p), minlength=p * n_levels).reshape(p, n_levels)


def cd_quadratic(A, w, g, x, x0, pen, lam, max_pass, tol):
    """Cyclic coordinate descent on a weighted quadratic model with l1 penalty.

    Minimizes g.(x - x0) + (1/2n) sum_i w_i (A_i (x - x0))^2 + lam sum_k pen_k |x_k|
    over x in place. Returns the number of passes.
    """
    n, m = A.shape
    h = (w[:, None] * A * A).sum(axis=0) / n
    q = A @ (x - x0)
    npass = 0
    while npass < max_pass:
        npass += 1
        max_change = 0.0
        for k in range(m):
            hk = h[k]
            if hk <= 0.0:
                continue
            gk = g[k] + float(A[:, k] @ (w * q)) / n
            u = hk * x[k] - gk
            thr = lam * pen[k]
            new = (u - thr) / hk if u > thr else ((u + thr) / hk if u < -thr else 0.0)
            delta = new - x[k]
            if delta != 0.0:
                q += A[:, k] * delta
                x[k] = new
                max_change = max(max_change, hk * delta * delta)
        if max_change < tol:
            break
    return npass


def _assign_sse(v, cs, cs2, c):
    # sorted v and c: each cluster is a contiguous run bounded by center midpoints
    k = c.size
    b = np.r_[0, np.searchsorted(v, 0.5 * (c[1:] + c[:-1]), side="right"), v.size]
    s1 = cs[b[1:]] - cs[b[:-1]]
    s2 = cs2[b[1:]] - cs2[b[:-1]]
    cnt = (b[1:] - b[:-1]).astype(float)
    sse = float(np.sum(s2 - 2.0 * c * s1 + c * c * cnt))
    return s1, cnt, sse


def kmeans_1d(v, k, u, max_iter, tol):
    """Best of ``u.shape[0]`` k-means++ / Lloyd runs on sorted data ``v``.

    ``u`` holds one row of k uniforms per restart: the first picks the initial
    center by index, the rest drive D^2 sampling. Returns (centers, sse).
    """
    n = v.size
    cs = np.r_[0.0, np.cumsum(v)]
    cs2 = np.r_[0.0, np.cumsum(v * v)]
    best_c, best_sse = None, np.inf
    for r in range(u.shape[0]):
        c = np.empty(k)
        c[0] = v[min(int(u[r, 0] * n), n - 1)]
        d2 = (v - c[0]) ** 2
        for m in range(1, k):
            cd = np.cumsum(d2)
            tot = cd[-1]
            if tot <= 0.0:
                c[m] = v[min(int(u[r, m] * n), n - 1)]
            else:
                c[m] = v[min(int(np.searchsorted(cd, u[r, m] * tot, side="right")), n - 1)]
            d2 = np.minimum(d2, (v - c[m]) ** 2)
        for _ in range(max_iter):
            c.sort()
            s1, cnt, _ = _assign_sse(v, cs, cs2, c)
            new = np.where(cnt > 0, s1 / np.maximum(cnt, 1.0), c)
            shift = float(np.max(np.abs(new - c)))
            c = new
            if shift < tol:
                break
        c.sort()
        sse = _assign_sse(v, cs, cs2, c)[2]
        if sse < best_sse - 1e-15:
            best_c, best_sse = c.copy(), sse
    return best_c, best_sse
