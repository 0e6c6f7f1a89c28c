"""Compare the compiled kernels with the NumPy fallback.

    python3 bench/bench_kernels.py [--repeat 5] [--end-to-end]

Kernel timings call both backends on identical inputs. ``--end-to-end`` also
times one Table-1 replication (n=400, p=500) in a subprocess per backend,
selected through FILTERLOGIT_BACKEND.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from filterlogit import kernels

E2E = """
import time
from filterlogit.simulation import preset, run_replication
(d, *_), pipe, comp = preset("table1", reps=1, n=400)
t = time.perf_counter()
run_replication(d, pipe, 0, comp)
print(time.perf_counter() - t)
"""


def cases(rng):
    n, p = 400, 500
    xs = np.sort(rng.normal(size=(p, n)), axis=1)
    y = rng.integers(0, 2, (p, n)).astype(np.float64)
    w = rng.integers(0, 3, (p, n)).astype(np.float64)
    lev = rng.integers(0, 7, (n, p)).astype(np.int32)
    table = rng.normal(size=(p, 7))
    r = rng.normal(size=n)
    A = np.asfortranarray(np.c_[np.ones(n), rng.normal(size=(n, 60))])
    wt = rng.uniform(0.1, 0.25, n)
    g = rng.normal(size=61) * 0.01
    pen = np.r_[0.0, np.ones(60)]
    v = np.sort(rng.normal(size=600))
    u = rng.random((50, 6))
    return {
        "split_scan (one column)": lambda k: k.split_scan(xs[0], y[0], w[0], 0, n, kernels.GINI),
        "column_cuts k=1 (p=500)": lambda k: k.column_cuts(xs, y, w, 1, kernels.GINI),
        "column_cuts k=6 (p=500)": lambda k: k.column_cuts(xs, y, w, 6, kernels.GINI),
        "level_matvec": lambda k: k.level_matvec(lev, table),
        "level_sums": lambda k: k.level_sums(lev, r, 7),
        "cd_quadratic (61 cols)": lambda k: k.cd_quadratic(A, wt, g, np.zeros(61), np.zeros(61), pen, 0.01,
                                                           100, 1e-14),
        "kmeans_1d k=6, 50 starts": lambda k: k.kmeans_1d(v, 6, u, 100, 1e-10),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()
    try:
        compiled = kernels.get_backend("compiled")
    except ImportError:
        sys.exit("compiled extension not built; run pip install -e . --no-build-isolation")
    python = kernels.get_backend("python")
    print(f"{'kernel':28s} {'compiled ms':>12s} {'python ms':>12s} {'speedup':>8s}")
    for name, call in cases(np.random.default_rng(0)).items():
        t = []
        for mod in (compiled, python):
            number = 3
            best = min(timeit.repeat(lambda: call(mod), number=number, repeat=args.repeat)) / number
            t.append(best * 1e3)
        print(f"{name:28s} {t[0]:12.3f} {t[1]:12.3f} {t[1] / t[0]:8.1f}x")
    if args.end_to_end:
        for be in ("compiled", "python"):
            env = dict(os.environ, FILTERLOGIT_BACKEND=be)
            out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
            print(f"Table-1 replication n=400, {be}: {float(out.stdout):.2f} s")


if __name__ == "__main__":
    main()
