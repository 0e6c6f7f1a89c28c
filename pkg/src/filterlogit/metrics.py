"""Forecast and selection metrics.

Scores that are negatively oriented (Logs, Brier, CRPS) are reported negated
so that higher is better throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import to_pm1

PROB_CLAMP = 1e-12


def _labels01(labels) -> np.ndarray:
    return (to_pm1(labels) > 0).astype(float)


def _two_class(y01: np.ndarray) -> None:
    if y01.size == 0 or y01.min() == y01.max():
        raise ValueError("both classes must be present")


def _midranks(v: np.ndarray) -> np.ndarray:
    _, inv, cnt = np.unique(v, return_inverse=True, return_counts=True)
    upper = np.cumsum(cnt)
    return (upper - (cnt - 1) / 2.0)[inv]


def auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied positive/negative pairs count one half."""
    s = np.asarray(scores, dtype=float)
    y = _labels01(labels)
    _two_class(y)
    n1 = y.sum()
    n0 = y.size - n1
    r = _midranks(s)
    return float((r[y == 1].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """ROC vertices (fpr, tpr) from (0, 0) to (1, 1); tied scores share a vertex."""
    s = np.asarray(scores, dtype=float)
    y = _labels01(labels)
    _two_class(y)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    tpr = np.r_[0.0, tp / y.sum()]
    fpr = np.r_[0.0, fp / (y.size - y.sum())]
    return fpr, tpr


def partial_auc(scores, labels, fpr_lo: float = 0.0, fpr_hi: float = 0.1) -> tuple[float, float]:
    """ROC area over FPR in [fpr_lo, fpr_hi] and its McClish standardization.

    The standardized value is 1/2 (1 + (raw - min) / (max - min)), with min the
    area of the diagonal and max that of a perfect curve over the same region.
    """
    if not 0.0 <= fpr_lo < fpr_hi <= 1.0:
        raise ValueError(f"need 0 <= fpr_lo < fpr_hi <= 1, got ({fpr_lo}, {fpr_hi})")
    fpr, tpr = roc_curve(scores, labels)
    # vertical ROC segments: interpolate to the upper end at the boundary
    t_lo = _roc_at(fpr, tpr, fpr_lo)
    t_hi = _roc_at(fpr, tpr, fpr_hi, upper=False)
    inside = (fpr > fpr_lo) & (fpr < fpr_hi)
    xs = np.r_[fpr_lo, fpr[inside], fpr_hi]
    ys = np.r_[t_lo, tpr[inside], t_hi]
    raw = float(np.sum(np.diff(xs) * (ys[1:] + ys[:-1]) / 2.0))
    lo = (fpr_hi ** 2 - fpr_lo ** 2) / 2.0
    hi = fpr_hi - fpr_lo
    return raw, 0.5 * (1.0 + (raw - lo) / (hi - lo))


def _roc_at(fpr, tpr, x, upper=True) -> float:
    # value of the ROC polyline at x; on a vertical run take its top (upper)
    # when entering the region and its bottom when leaving it
    hits = np.flatnonzero(fpr == x)
    if hits.size:
        return float(tpr[hits[-1]] if upper else tpr[hits[0]])
    return float(np.interp(x, fpr, tpr))


def proper_scores(probs, labels) -> tuple[float, float, float]:
    """(-Logs, -CRPS, -Brier) averaged over samples.

    For a Bernoulli predictive law on {0, 1} the CRPS equals the Brier score.
    """
    p = np.asarray(probs, dtype=float)
    y = _labels01(labels)
    if p.shape != y.shape:
        raise ValueError("probs and labels differ in length")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    q = np.where(y == 1, p, 1.0 - p)
    if np.any(q < PROB_CLAMP):
        warnings.warn("probability of the observed outcome below 1e-12; clamped", RuntimeWarning, stacklevel=2)
        q = np.maximum(q, PROB_CLAMP)
    logs = float(-np.mean(np.log(q)))
    brier = float(np.mean((p - y) ** 2))
    return -logs, -brier, -brier


def default_grid() -> np.ndarray:
    return np.round(np.arange(1, 100) / 100.0, 2)


@dataclass(frozen=True)
class MurphyCurve:
    grid: np.ndarray
    score: np.ndarray
    alpha: float


def murphy_scores(probs, labels, alpha: float = 0.9, p_grid=None) -> MurphyCurve:
    """Mean elementary score at each grid point (lower is better).

    A sample contributes |y - p| when forecast and outcome fall on opposite
    sides of p, weighted by alpha if y > p and by 1 - alpha otherwise.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    grid = default_grid() if p_grid is None else np.asarray(p_grid, dtype=float)
    if np.any((grid <= 0) | (grid >= 1)):
        raise ValueError("grid points must lie in (0, 1)")
    ph = np.asarray(probs, dtype=float)[:, None]
    y = _labels01(labels)[:, None]
    g = grid[None, :]
    miss = (ph - g) * (y - g) < 0
    w = np.where(y > g, alpha, 1.0 - alpha)
    s = np.where(miss, np.abs(y - g) * w, 0.0)
    return MurphyCurve(grid, s.mean(axis=0), alpha)


@dataclass(frozen=True)
class EvalReport:
    auc: float
    pauc_raw: float
    pauc_standardized: float
    logs: float
    crps: float
    brier: float
    murphy: MurphyCurve

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("auc", self.auc),
            ("pauc_raw", self.pauc_raw),
            ("pauc_standardized", self.pauc_standardized),
            ("logs", self.logs),
            ("crps", self.crps),
            ("brier", self.brier),
        ]


def evaluate(probs, labels, fpr_hi: float = 0.1, alpha: float = 0.9, p_grid=None) -> EvalReport:
    a = auc(probs, labels)
    raw, std = partial_auc(probs, labels, 0.0, fpr_hi)
    logs, crps, brier = proper_scores(probs, labels)
    return EvalReport(a, raw, std, logs, crps, brier, murphy_scores(probs, labels, alpha, p_grid))


# -- estimation and selection accuracy (simulation truth) -------------------

@dataclass(frozen=True)
class Truth:
    """True cuts and level coefficients (logit scale, level 0 fixed at 0)."""

    cuts: list
    B: list
    support: np.ndarray


@dataclass(frozen=True)
class SelectionReport:
    mab_t: float
    rse_est: float
    rmse_est: float
    sen_vs: float
    spe_vs: float


def _cut_error(est: np.ndarray, true: np.ndarray) -> np.ndarray:
    if est.size == true.size:
        return np.abs(np.sort(est) - np.sort(true))
    if est.size == 0:
        return np.full(true.size, np.nan)
    return np.abs(true[:, None] - est[None, :]).min(axis=1)


def _eval_points(cuts: np.ndarray) -> np.ndarray:
    # one point inside each true level 1..K
    if cuts.size == 1:
        return cuts + 0.5
    gap = float(np.mean(np.diff(cuts)))
    return np.r_[(cuts[:-1] + cuts[1:]) / 2.0, cuts[-1] + gap / 2.0]


def _step(cuts: np.ndarray, levels: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.r_[0.0, levels][np.searchsorted(cuts, x, side="right")]


def selection_metrics(model, truth: Truth, scale: float = 2.0) -> SelectionReport:
    """Threshold bias, coefficient error and variable-selection rates.

    ``scale`` maps fitted coefficients onto the scale of ``truth.B``; the fit
    uses P(y=1) = 1/(1+exp(-2f)), so logit-scale truth needs a factor of 2.
    Blocks with the same number of levels are compared entrywise; otherwise
    both step functions are evaluated at one point inside each true level.
    """
    p = len(model.thresholds.cuts)
    if len(truth.cuts) != p or len(truth.B) != p:
        raise ValueError("truth does not cover every covariate")
    support = np.asarray(truth.support, dtype=int)
    errs = [_cut_error(np.asarray(model.thresholds.cuts[j]), np.asarray(truth.cuts[j], dtype=float))
            for j in support]
    mab = float(np.nanmean(np.concatenate(errs))) if errs else 0.0
    sq = 0.0
    for j, bj in enumerate(model.blocks()):
        tb = np.asarray(truth.B[j], dtype=float)
        tc = np.asarray(truth.cuts[j], dtype=float)
        if bj.size == tb.size:
            sq += float(np.sum((scale * bj - tb) ** 2))
        elif tc.size:
            x = _eval_points(tc)
            sq += float(np.sum((scale * _step(model.thresholds.cuts[j], bj, x) - _step(tc, tb, x)) ** 2))
        else:
            sq += float(np.sum((scale * bj) ** 2))
    rse = float(np.sqrt(sq))
    sel = np.zeros(p, dtype=bool)
    sel[model.selected()] = True
    true = np.zeros(p, dtype=bool)
    true[support] = True
    tp = np.sum(sel & true)
    tn = np.sum(~sel & ~true)
    sen = float(tp / true.sum()) if true.any() else 1.0
    spe = float(tn / (~true).sum()) if (~true).any() else 1.0
    return SelectionReport(mab, rse, rse / np.sqrt(p), sen, spe)
