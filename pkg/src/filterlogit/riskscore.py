"""Additive 0-100 risk score built from a fitted model's level coefficients."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CovariateScore:
    name: str
    index: int
    lower: np.ndarray   # left end of each merged range (-inf for the first)
    points: np.ndarray  # contribution of each merged range, minimum exactly 0
    raw: np.ndarray     # the same contributions before scaling to 100

    def ranges(self) -> list[tuple[float, float]]:
        upper = np.r_[self.lower[1:], np.inf]
        return list(zip(self.lower.tolist(), upper.tolist()))


@dataclass(frozen=True)
class RiskScoreTable:
    covariates: tuple[CovariateScore, ...]
    global_scale: float
    n_features: int


def build_table(model, merge_tol: float = 1e-8) -> RiskScoreTable:
    """Merge fused levels, shift each covariate's minimum to 0, scale to 100.

    Adjacent levels whose coefficients differ by at most ``merge_tol`` are
    merged. Covariates whose shifted block is identically zero are dropped.
    """
    if merge_tol < 0:
        raise ValueError("merge_tol must be >= 0")
    kept = []
    for j, (name, cuts, bj) in enumerate(zip(model.names, model.thresholds.cuts, model.blocks())):
        coef = np.r_[0.0, bj]
        lower = np.r_[-np.inf, cuts]
        keep = np.r_[True, np.abs(np.diff(coef)) > merge_tol]
        coef, lower = coef[keep], lower[keep]
        shifted = coef - coef.min()
        if not np.any(shifted > 0):
            continue
        kept.append((name, j, lower, shifted))
    total = 0.0
    for *_, sh in kept:
        total += float(sh.max())
    if not kept:
        warnings.warn("model has no nonzero coefficient block; risk-score table is empty", RuntimeWarning,
                      stacklevel=2)
        return RiskScoreTable((), 0.0, len(model.names))
    covs = []
    for name, j, lower, shifted in kept:
        pts = 100.0 * shifted / total
        pts[shifted == 0] = 0.0
        covs.append(CovariateScore(name, j, lower, pts, shifted))
    return RiskScoreTable(tuple(covs), total, len(model.names))


def score_individual(table: RiskScoreTable, x) -> float:
    """Sum of the contributions of the ranges containing each covariate value."""
    return float(score_many(table, np.asarray(x, dtype=float)[None, :])[0])


def score_many(table: RiskScoreTable, X) -> np.ndarray:
    X = np.asarray(getattr(X, "features", X), dtype=float)
    if X.ndim != 2 or X.shape[1] != table.n_features:
        raise ValueError(f"expected {table.n_features} covariates, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("covariate values must be finite")
    s = np.zeros(X.shape[0])
    if not table.covariates:
        return s
    # sum unscaled contributions in table order, then scale once: the
    # all-maximum individual then scores exactly (total / total) * 100
    for c in table.covariates:
        lev = np.searchsorted(c.lower[1:], X[:, c.index], side="right")
        s += c.raw[lev]
    return s / table.global_scale * 100.0


def _fmt_bound(v: float) -> str:
    return f"{v:.6g}"


def table_csv(table: RiskScoreTable) -> str:
    """variable, range, score rows; ranges are closed on the left."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variable", "range", "score"])
    for c in table.covariates:
        for (lo, hi), pts in zip(c.ranges(), c.points):
            if math.isinf(lo):
                rng = f"< {_fmt_bound(hi)}"
            elif math.isinf(hi):
                rng = f">= {_fmt_bound(lo)}"
            else:
                rng = f"[{_fmt_bound(lo)}, {_fmt_bound(hi)})"
            w.writerow([c.name, rng, f"{pts:.2f}"])
    return buf.getvalue()
