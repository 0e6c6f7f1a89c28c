"""Cross-validation over the lambda path and over the number of cuts K."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .encoding import levels_of
from .metrics import auc
from .solver import Method, SolverConfig, fit_path, lambda_max, link_loss, prepare
from .splits import BaggingConfig, SplitCriterion, ThresholdSet, estimate_thresholds


class Metric(enum.Enum):
    DEVIANCE = "deviance"
    AUC = "auc"


class FoldError(ValueError):
    pass


@dataclass(frozen=True)
class CvConfig:
    n_folds: int = 5
    lambda_grid: tuple | None = None
    n_lambda: int = 50
    lambda_min_ratio: float = 1e-3
    metric: Metric = Metric.DEVIANCE
    rng_seed: int = 0
    two_se_rule: bool = False
    # end a fold's path after this many grid points without improvement
    patience: int | None = None

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")
        if self.lambda_grid is not None:
            g = np.asarray(self.lambda_grid, dtype=float)
            if g.size == 0 or np.any(g <= 0) or np.any(np.diff(g) >= 0):
                raise ValueError("lambda_grid must be positive and strictly descending")


@dataclass
class CvCurve:
    lambdas: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    n_folds: int
    fold_values: np.ndarray = field(repr=False)

    def rows(self):
        return [(float(l), float(m), float(s)) for l, m, s in zip(self.lambdas, self.mean, self.sd)]


def stratified_folds(labels, n_folds: int, seed: int) -> np.ndarray:
    """Fold id per sample; each class is shuffled and dealt round-robin.

    If some fold lacks a class the assignment is redrawn once with a shifted
    seed; a second failure raises FoldError.
    """
    y = np.asarray(labels)
    for attempt in range(2):
        rng = np.random.default_rng([seed, attempt])
        fold = np.empty(y.size, dtype=int)
        start = 0
        for c in np.unique(y):
            idx = np.flatnonzero(y == c)
            idx = idx[rng.permutation(idx.size)]
            fold[idx] = (start + np.arange(idx.size)) % n_folds
            start += idx.size
        ok = all(np.unique(y[fold == k]).size == np.unique(y).size for k in range(n_folds))
        if ok:
            return fold
    raise FoldError(f"cannot build {n_folds} folds with both classes in every fold")


def default_grid(lam_max: float, n_lambda: int = 50, ratio: float = 1e-3) -> np.ndarray:
    if lam_max <= 0:
        return np.array([1e-8])
    return lam_max * np.logspace(0.0, np.log10(ratio), n_lambda)


def _validation_loss(metric: Metric, f: np.ndarray, y: np.ndarray) -> float:
    # lower is better for both metrics
    if metric is Metric.DEVIANCE:
        return 2.0 * link_loss(f, y)
    return -auc(f, y)


def _choose(lambdas, mean, sd, n_folds, two_se) -> int:
    ok = np.isfinite(mean)
    best = int(np.nanargmin(np.where(ok, mean, np.nan)))
    if not two_se:
        return best
    bound = mean[best] + 2.0 * sd[best] / np.sqrt(n_folds)
    # grid descends, so the first admissible index is the largest lambda
    return int(np.flatnonzero(ok & (mean <= bound))[0])


def _lambda_grid(data: Dataset, thresholds: ThresholdSet, cfg: CvConfig, design=None) -> np.ndarray:
    if cfg.lambda_grid is not None:
        return np.asarray(cfg.lambda_grid, dtype=float)
    _, zt = design if design is not None else prepare(data, thresholds)
    return default_grid(lambda_max(zt, data.labels), cfg.n_lambda, cfg.lambda_min_ratio)


def _fold_curve(train: Dataset, valid: Dataset, thresholds, grid, solver: SolverConfig,
                metric: Metric, patience: int | None) -> np.ndarray:
    vals = np.full(grid.size, np.nan)
    yv = valid.labels.astype(float)
    lev = levels_of(valid.features, thresholds)
    state = {"i": 0, "best": np.inf, "since": 0}

    def stop(model):
        i = state["i"]
        vals[i] = _validation_loss(metric, model.predictor_from_levels(lev), yv)
        state["i"] = i + 1
        if vals[i] < state["best"]:
            state["best"], state["since"] = vals[i], 0
        else:
            state["since"] += 1
        return patience is not None and state["since"] >= patience

    fit_path(train, thresholds, grid, solver, stop=stop)
    return vals


def cv_lambda(data: Dataset, thresholds: ThresholdSet, cfg: CvConfig = CvConfig(),
              solver: SolverConfig = SolverConfig(method=Method.PROX_NEWTON)) -> tuple[float, CvCurve]:
    """Choose lambda by stratified k-fold CV on a warm-started path.

    Returns the minimizer of the mean validation loss (deviance, or -AUC), or
    with ``two_se_rule`` the largest lambda within two standard errors of it.
    Lambda values a fold never reached (early stopping) are excluded.
    """
    data.require_fit_ready()
    grid = _lambda_grid(data, thresholds, cfg)
    folds = stratified_folds(data.labels, cfg.n_folds, cfg.rng_seed)
    values = np.vstack([
        _fold_curve(data.subset(folds != k), data.subset(folds == k), thresholds, grid, solver,
                    cfg.metric, cfg.patience)
        for k in range(cfg.n_folds)
    ])
    complete = np.all(np.isfinite(values), axis=0)
    mean = np.where(complete, np.nanmean(np.where(complete, values, 0.0), axis=0), np.nan)
    sd = np.where(complete, np.std(np.where(complete, values, 0.0), axis=0, ddof=1), np.nan)
    best = _choose(grid, mean, sd, cfg.n_folds, cfg.two_se_rule)
    return float(grid[best]), CvCurve(grid, mean, sd, cfg.n_folds, values)


def fit_cv(data: Dataset, thresholds: ThresholdSet, cfg: CvConfig = CvConfig(),
           solver: SolverConfig = SolverConfig(method=Method.PROX_NEWTON)):
    """cv_lambda followed by a warm-started full-data path down to the chosen lambda."""
    design = prepare(data, thresholds)
    if cfg.lambda_grid is None:
        grid = _lambda_grid(data, thresholds, cfg, design)
        cfg = replace(cfg, lambda_grid=tuple(grid))
    lam, curve = cv_lambda(data, thresholds, cfg, solver)
    path = curve.lambdas[curve.lambdas >= lam]
    model = fit_path(data, thresholds, path, solver, design=design)[-1]
    return model, curve


def cv_k(data: Dataset, k_candidates, cfg: CvConfig = CvConfig(metric=Metric.AUC),
         bag_cfg: BaggingConfig = BaggingConfig(),
         criterion: SplitCriterion = SplitCriterion.GINI,
         solver: SolverConfig = SolverConfig(method=Method.PROX_NEWTON)) -> tuple[int, dict]:
    """Choose the number of cuts per covariate by CV on validation AUC.

    Thresholds are re-estimated on each training fold. For every K the score
    is the best mean AUC over the lambda path; the smallest K within two
    standard errors of the overall best is returned.
    """
    ks = [int(k) for k in k_candidates]
    if not ks:
        raise ValueError("k_candidates is empty")
    if len(ks) == 1:
        return ks[0], {}
    data.require_fit_ready()
    folds = stratified_folds(data.labels, cfg.n_folds, cfg.rng_seed)
    summary = {}
    for K in sorted(set(ks)):
        curves = []
        for f in range(cfg.n_folds):
            train, valid = data.subset(folds != f), data.subset(folds == f)
            ts = estimate_thresholds(train, bag_cfg, k=K, criterion=criterion)
            grid = _lambda_grid(train, ts, cfg)
            curves.append(_fold_curve(train, valid, ts, grid, solver, Metric.AUC, cfg.patience))
        v = -np.vstack(curves)
        mean = np.nanmean(v, axis=0)
        i = int(np.nanargmax(mean))
        col = v[:, i]
        col = col[np.isfinite(col)]
        summary[K] = (float(mean[i]), float(np.std(col, ddof=1)) if col.size > 1 else 0.0)
    best_k = max(summary, key=lambda k: (summary[k][0], -k))
    m, s = summary[best_k]
    bound = m - 2.0 * s / np.sqrt(cfg.n_folds)
    chosen = min(k for k in summary if summary[k][0] >= bound)
    return chosen, summary
