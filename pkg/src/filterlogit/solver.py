"""Fusion-penalized logistic threshold regression.

The fused penalty lambda * sum |beta_k - beta_{k-1}| becomes a plain l1
penalty on theta = T B, so the fit is an l1-penalized logistic regression on
the transformed design Z D, solved by proximal gradient with backtracking.

Probability convention: the loss is the psi-form negative log-likelihood with
psi(u) = log(e^u + e^-u), under which P(y = +1 | f) = 1 / (1 + exp(-2 f)).
``predict_proba`` uses the same convention so probabilities and loss agree.
Rankings, AUC and the 1/2 cutoff rule do not depend on this choice.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .data import Dataset, to_pm1
from .encoding import (
    DifferenceTransform,
    ThresholdedDesign,
    TransformedDesign,
    center,
    encode,
    from_theta,
    levels_of,
    transform_design,
)
from .splits import ThresholdSet

log = logging.getLogger(__name__)

MODEL_FORMAT = "filterlogit.model"
MODEL_VERSION = 1


class StepRule(enum.Enum):
    FIXED_LIPSCHITZ = "fixed"
    BACKTRACKING = "backtracking"


class Method(enum.Enum):
    PROX_GRAD = "prox_grad"
    PROX_NEWTON = "prox_newton"


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.0
    max_iters: int = 20000
    tol: float = 1e-8
    intercept: bool = True
    step_rule: StepRule = StepRule.BACKTRACKING
    accelerate: bool = False
    working_set: bool = True
    method: Method = Method.PROX_GRAD

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _pm1(y) -> np.ndarray:
    return to_pm1(y).astype(float)


def link_loss(f, y) -> float:
    """Mean of log(1 + exp(-2 y f)); equals the psi-form loss pointwise."""
    return float(np.mean(np.logaddexp(0.0, -2.0 * y * f)))


def loss_grad(theta, intercept: float, design: TransformedDesign, y):
    """Loss and gradient; gradient is (d/d intercept, d/d theta_1..K)."""
    y = _pm1(y)
    theta = np.asarray(theta, dtype=float)
    f = intercept + design.matvec(theta)
    r = (np.tanh(f) - y) / design.n
    return link_loss(f, y), np.concatenate([[r.sum()], design.rmatvec(r)])


def objective(theta, intercept, design, y, lam) -> float:
    y = _pm1(y)
    f = intercept + design.matvec(theta)
    return link_loss(f, y) + lam * float(np.abs(theta).sum())


def kkt_residual(theta, grad_theta, grad_b, lam, fit_intercept=True) -> float:
    g = np.asarray(grad_theta)
    zero = theta == 0
    viol = np.where(zero, np.maximum(np.abs(g) - lam, 0.0), np.abs(g + lam * np.sign(theta)))
    res = float(viol.max()) if viol.size else 0.0
    if fit_intercept:
        res = max(res, abs(float(grad_b)))
    return res


def lambda_max(design: TransformedDesign, y) -> float:
    """Smallest lambda with theta = 0 optimal, after an intercept-only fit."""
    y = _pm1(y)
    b0 = np.arctanh(np.clip(y.mean(), -1 + 1e-15, 1 - 1e-15))
    r = (np.tanh(b0) - y) / design.n
    g = design.rmatvec(r)
    return float(np.abs(g).max()) if g.size else 0.0


def _lipschitz(design: TransformedDesign, fit_intercept: bool, iters: int = 30) -> float:
    """Power-iteration estimate of the largest eigenvalue of (1/n) A^T A, A = [1, Z D]."""
    n = design.n
    v = np.ones(design.K + 1) / np.sqrt(design.K + 1)
    lam = 1.0
    for _ in range(iters):
        u = design.matvec(v[1:]) + (v[0] if fit_intercept else 0.0)
        w = np.concatenate([[u.sum() if fit_intercept else 0.0], design.rmatvec(u)]) / n
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 1.0
        lam = nrm
        v = w / nrm
    # power iteration underestimates; pad so the fixed step is safe
    return 1.05 * lam


@dataclass
class FitTrace:
    objective: list = field(default_factory=list)


def _prox_grad(design, y, lam, cfg: SolverConfig, theta0, b0, trace: FitTrace | None):
    """Proximal gradient on a (sub)design; returns theta, b, iterations, converged, kkt."""
    n = design.n
    fit_b = cfg.intercept
    theta = theta0.copy()
    b = b0 if fit_b else 0.0

    def smooth(th, bb):
        f = bb + design.matvec(th)
        r = (np.tanh(f) - y) / n
        return link_loss(f, y), r

    L = _lipschitz(design, fit_b, iters=30 if cfg.step_rule is StepRule.FIXED_LIPSCHITZ else 8)
    step = 1.0 / L
    loss, r = smooth(theta, b)
    F = loss + lam * np.abs(theta).sum()
    if trace is not None:
        trace.objective.append(F)
    # momentum state for the accelerated variant
    z_theta, z_b, z_loss, z_r = theta, b, loss, r
    t_mom = 1.0
    converged = False
    kkt = np.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        gz_t = design.rmatvec(z_r)
        gz_b = z_r.sum() if fit_b else 0.0
        while True:
            th_new = soft_threshold(z_theta - step * gz_t, step * lam)
            b_new = z_b - step * gz_b if fit_b else 0.0
            loss_new, r_new = smooth(th_new, b_new)
            if cfg.step_rule is StepRule.FIXED_LIPSCHITZ:
                break
            d_t = th_new - z_theta
            d_b = b_new - z_b
            quad = z_loss + gz_t @ d_t + gz_b * d_b + (d_t @ d_t + d_b * d_b) / (2 * step)
            if loss_new <= quad + 1e-15 * max(1.0, abs(quad)):
                break
            step *= 0.5
        F_new = loss_new + lam * np.abs(th_new).sum()
        if cfg.accelerate and F_new > F:
            # restart momentum and retake a plain step from the current iterate
            z_theta, z_b, z_loss, z_r = theta, b, loss, r
            t_mom = 1.0
            continue
        dec = (F - F_new) / max(1.0, abs(F_new))
        if cfg.accelerate:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
            beta = (t_mom - 1.0) / t_next
            t_mom = t_next
            z_theta = th_new + beta * (th_new - theta)
            z_b = b_new + beta * (b_new - b) if fit_b else 0.0
            if beta != 0.0:
                z_loss, z_r = smooth(z_theta, z_b)
            else:
                z_loss, z_r = loss_new, r_new
        else:
            z_theta, z_b, z_loss, z_r = th_new, b_new, loss_new, r_new
        theta, b, loss, r, F = th_new, b_new, loss_new, r_new, F_new
        if trace is not None:
            trace.objective.append(F)
        if cfg.step_rule is StepRule.BACKTRACKING:
            step *= 1.25
        if dec < cfg.tol:
            g_t = design.rmatvec(r)
            kkt = kkt_residual(theta, g_t, r.sum(), lam, fit_b)
            if kkt <= 10 * cfg.tol:
                converged = True
                break
    if not converged:
        kkt = kkt_residual(theta, design.rmatvec(r), r.sum(), lam, fit_b)
    return theta, b, it, converged, kkt


def _prox_newton(design, y, lam, cfg: SolverConfig, theta0, b0, trace: FitTrace | None):
    """Proximal Newton: coordinate descent on the local quadratic model, then a
    backtracking line search on the true objective (sufficient-decrease rule)."""
    n = design.n
    fit_b = cfg.intercept
    A = np.asfortranarray(np.column_stack([np.ones(n), design.dense()]))
    pen = np.ones(A.shape[1])
    pen[0] = 0.0
    x = np.concatenate([[b0 if fit_b else 0.0], theta0])

    def evaluate(xx):
        f = A @ xx
        return link_loss(f, y) + lam * np.abs(xx[1:]).sum(), f

    F, f = evaluate(x)
    if trace is not None:
        trace.objective.append(F)
    converged = False
    kkt = np.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        th = np.tanh(f)
        g = A.T @ ((th - y) / n)
        if not fit_b:
            g[0] = 0.0
        kkt = kkt_residual(x[1:], g[1:], g[0], lam, fit_b)
        if kkt <= cfg.tol:
            converged = True
            break
        w = np.maximum(1.0 - th * th, 1e-10)
        x_new = x.copy()
        kernels.cd_quadratic(A, w, np.ascontiguousarray(g), x_new, x, pen if fit_b else np.r_[np.inf, pen[1:]],
                             lam, 1000, max(0.01 * kkt * kkt, 0.01 * cfg.tol * cfg.tol))
        if not fit_b:
            x_new[0] = 0.0
        d = x_new - x
        delta = g @ d + lam * (np.abs(x_new[1:]).sum() - np.abs(x[1:]).sum())
        step = 1.0
        while True:
            F_try, f_try = evaluate(x + step * d)
            if F_try <= F + 1e-4 * step * delta or step < 1e-12:
                break
            step *= 0.5
        if F_try > F:
            break
        x_prev_F = F
        x = x + step * d
        if step == 1.0:
            x = x_new
        F, f = F_try, f_try
        if trace is not None:
            trace.objective.append(F)
        if x_prev_F - F <= 1e-16 * max(1.0, abs(F)) and step < 1.0:
            break
    if not converged:
        th = np.tanh(f)
        g = A.T @ ((th - y) / n)
        kkt = kkt_residual(x[1:], g[1:], g[0], lam, fit_b)
        converged = kkt <= 10 * cfg.tol
    return x[1:].copy(), float(x[0]), it, converged, kkt


def _inner(design, y, lam, cfg, theta0, b0, trace):
    if cfg.method is Method.PROX_NEWTON:
        return _prox_newton(design, y, lam, cfg, theta0, b0, trace)
    return _prox_grad(design, y, lam, cfg, theta0, b0, trace)


def _restrict(design: TransformedDesign, cols: np.ndarray):
    """Sub-design on a subset of covariates plus the matching theta index."""
    off = np.concatenate([[0], np.cumsum(design.block_sizes)])
    idx = np.concatenate([np.arange(off[j], off[j + 1]) for j in cols]) if cols.size else np.zeros(0, int)
    sub = TransformedDesign(
        np.ascontiguousarray(design.levels[:, cols]),
        tuple(design.block_sizes[j] for j in cols),
        design.shift[idx],
    )
    return sub, idx


@dataclass
class FitResult:
    theta: np.ndarray
    intercept: float
    iterations: int
    converged: bool
    kkt_residual: float
    trace: FitTrace | None = None


def solve(design: TransformedDesign, y, cfg: SolverConfig, theta0=None, b0=None,
          record: bool = False) -> FitResult:
    """Minimize mean log(1+exp(-2 y f)) + lam * ||theta||_1, f = b + Z D theta.

    With ``cfg.working_set`` the problem is solved on the covariates that are
    active or violate the optimality conditions, and re-solved after adding
    any covariate whose full-design gradient still violates them. The
    returned KKT residual is always computed on the full design.
    """
    y = _pm1(y)
    lam = cfg.lam
    K = design.K
    theta = np.zeros(K) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    if b0 is None:
        b = float(np.arctanh(np.clip(y.mean(), -1 + 1e-12, 1 - 1e-12))) if cfg.intercept else 0.0
    else:
        b = float(b0) if cfg.intercept else 0.0
    trace = FitTrace() if record else None
    if not cfg.working_set or K == 0:
        th, b, it, conv, kkt = _inner(design, y, lam, cfg, theta, b, trace)
        return FitResult(th, b, it, conv, kkt, trace)

    p = len(design.block_sizes)
    off = np.concatenate([[0], np.cumsum(design.block_sizes)])
    block_of = np.repeat(np.arange(p), design.block_sizes)

    def full_grad(th, bb):
        f = bb + design.matvec(th)
        r = (np.tanh(f) - y) / design.n
        return design.rmatvec(r), r.sum()

    g, gb = full_grad(theta, b)
    active = np.zeros(p, dtype=bool)
    active[block_of[theta != 0]] = True
    active[block_of[np.abs(g) > lam]] = True
    total_it = 0
    while True:
        cols = np.flatnonzero(active)
        sub, idx = _restrict(design, cols)
        th_sub, b, it, conv, _ = _inner(sub, y, lam, cfg, theta[idx], b, trace)
        total_it += it
        theta = np.zeros(K)
        theta[idx] = th_sub
        g, gb = full_grad(theta, b)
        kkt = kkt_residual(theta, g, gb, lam, cfg.intercept)
        viol = np.zeros(p, dtype=bool)
        viol[block_of[np.abs(g) > lam + 5 * cfg.tol]] = True
        viol &= ~active
        if not viol.any() or total_it >= cfg.max_iters:
            converged = conv and kkt <= 10 * cfg.tol
            return FitResult(theta, b, total_it, converged, kkt, trace)
        active |= viol


@dataclass
class FilterModel:
    """Fitted model: intercept, theta (differences), B (levels), thresholds."""

    intercept: float
    theta: np.ndarray
    B: np.ndarray
    thresholds: ThresholdSet
    column_means: np.ndarray
    lam: float
    iterations: int = 0
    converged: bool = True
    kkt_residual: float = 0.0
    tol: float = 1e-8

    @property
    def transform(self) -> DifferenceTransform:
        return DifferenceTransform(tuple(self.thresholds.block_sizes))

    @property
    def names(self) -> tuple[str, ...]:
        return self.thresholds.names

    def blocks(self, v=None) -> list[np.ndarray]:
        return self.transform.blocks(self.B if v is None else v)

    def selected(self) -> np.ndarray:
        """Indices of covariates with a nonzero adjacent difference."""
        return np.array([j for j, th in enumerate(self.blocks(self.theta)) if np.any(th != 0)], dtype=int)

    def linear_predictor(self, X) -> np.ndarray:
        X = getattr(X, "features", X)
        return self.predictor_from_levels(levels_of(X, self.thresholds))

    def predictor_from_levels(self, lev: np.ndarray) -> np.ndarray:
        """Linear predictor from precomputed level indices (see ``levels_of``)."""
        sizes = np.asarray(self.thresholds.block_sizes, dtype=int)
        table = np.zeros((sizes.size, int(sizes.max(initial=0)) + 1))
        rows = np.repeat(np.arange(sizes.size), sizes)
        cols = np.arange(self.B.size) - np.repeat(np.cumsum(sizes) - sizes, sizes) + 1
        table[rows, cols] = self.B
        f = kernels.level_matvec(np.ascontiguousarray(lev, dtype=np.int32), table)
        return f + (self.intercept - float(self.column_means @ self.B))

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "probability_link": "1/(1+exp(-2f))",
            "intercept": float(self.intercept),
            "thresholds": self.thresholds.to_json(),
            "column_means": [float(v) for v in self.column_means],
            "theta": [float(v) for v in self.theta],
            "B": [float(v) for v in self.B],
            "lambda": float(self.lam),
            "convergence": {
                "iterations": int(self.iterations),
                "converged": bool(self.converged),
                "kkt_residual": float(self.kkt_residual),
                "tol": float(self.tol),
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, doc: dict) -> "FilterModel":
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a model document (format={doc.get('format')!r})")
        if doc.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')!r}")
        th = ThresholdSet.from_json(doc["thresholds"])
        theta = np.array(doc["theta"], dtype=float)
        B = np.array(doc["B"], dtype=float)
        K = int(th.block_sizes.sum())
        if theta.shape != (K,) or B.shape != (K,) or len(doc["column_means"]) != K:
            raise ValueError("coefficient vectors do not match the threshold blocks")
        conv = doc.get("convergence", {})
        return cls(
            intercept=float(doc["intercept"]),
            theta=theta,
            B=B,
            thresholds=th,
            column_means=np.array(doc["column_means"], dtype=float),
            lam=float(doc["lambda"]),
            iterations=int(conv.get("iterations", 0)),
            converged=bool(conv.get("converged", True)),
            kkt_residual=float(conv.get("kkt_residual", 0.0)),
            tol=float(conv.get("tol", 1e-8)),
        )

    @classmethod
    def loads(cls, text: str) -> "FilterModel":
        return cls.from_json(json.loads(text))


def fit(design, y, t: DifferenceTransform | None, cfg: SolverConfig, thresholds: ThresholdSet | None = None,
        warm: FilterModel | None = None) -> FilterModel:
    """Fit on a centered thresholded design; returns fused coefficients B = D theta.

    ``design`` may be a centered ThresholdedDesign (transformed here) or an
    already transformed design together with ``thresholds``.
    """
    y = _pm1(y)
    if len(np.unique(y)) < 2:
        raise ValueError("both classes must be present to fit")
    if isinstance(design, ThresholdedDesign):
        if not design.centered:
            raise ValueError("fit expects a centered design; call center() first")
        column_means = design.column_means
        tdesign = transform_design(design, t)
    elif isinstance(design, tuple):
        column_means = design[0].column_means
        tdesign = design[1]
    else:
        tdesign = design
        column_means = _indicator_means_from_shift(tdesign)
    t = t or DifferenceTransform(tdesign.block_sizes)
    if thresholds is None:
        thresholds = ThresholdSet(tuple(f"x{j + 1}" for j in range(len(t.block_sizes))),
                                  [np.arange(1.0, k + 1) for k in t.block_sizes])
    res = solve(tdesign, y, cfg,
                theta0=None if warm is None else warm.theta,
                b0=None if warm is None else warm.intercept)
    if not res.converged:
        log.warning("solver stopped after %d iterations without convergence (kkt=%.3g)",
                    res.iterations, res.kkt_residual)
    return FilterModel(
        intercept=res.intercept,
        theta=res.theta,
        B=from_theta(res.theta, t),
        thresholds=thresholds,
        column_means=np.asarray(column_means, dtype=float),
        lam=cfg.lam,
        iterations=res.iterations,
        converged=res.converged,
        kkt_residual=res.kkt_residual,
        tol=cfg.tol,
    )


def _indicator_means_from_shift(d: TransformedDesign) -> np.ndarray:
    # shift is the suffix sum of indicator means within each block
    t = DifferenceTransform(d.block_sizes)
    return np.concatenate([s - np.append(s[1:], 0.0) for s in t.blocks(d.shift)]) if d.block_sizes else np.zeros(0)


def prepare(data: Dataset, thresholds: ThresholdSet) -> tuple[ThresholdedDesign, TransformedDesign]:
    """Encode, center and transform ``data`` under ``thresholds``."""
    if tuple(data.feature_names) != tuple(thresholds.names):
        raise ValueError("threshold covariate names do not match the dataset columns")
    zc = center(encode(data, thresholds))
    return zc, transform_design(zc)


def fit_dataset(data: Dataset, thresholds: ThresholdSet, cfg: SolverConfig,
                warm: FilterModel | None = None) -> FilterModel:
    data.require_fit_ready()
    zc, zt = prepare(data, thresholds)
    return fit((zc, zt), data.labels, DifferenceTransform(zc.block_sizes), cfg, thresholds=thresholds, warm=warm)


def fit_path(data: Dataset, thresholds: ThresholdSet, lambdas, cfg: SolverConfig, *, design=None,
             stop=None) -> list[FilterModel]:
    """Warm-started fits over a descending lambda sequence.

    ``design`` may pass a precomputed ``prepare`` result. ``stop(model)``, if
    given, is called after each fit and ends the path early when it returns True.
    """
    data.require_fit_ready()
    zc, zt = design if design is not None else prepare(data, thresholds)
    t = DifferenceTransform(zc.block_sizes)
    models: list[FilterModel] = []
    warm = None
    for lam in lambdas:
        warm = fit((zc, zt), data.labels, t, with_lambda(cfg, lam), thresholds=thresholds, warm=warm)
        models.append(warm)
        if stop is not None and stop(warm):
            break
    return models


def _check_names(model: FilterModel, data) -> None:
    if isinstance(data, Dataset):
        if tuple(data.feature_names) != tuple(model.names):
            raise ValueError(f"covariates {data.feature_names[:5]}... do not match model {model.names[:5]}...")
    elif np.asarray(data).shape[1] != len(model.names):
        raise ValueError(f"expected {len(model.names)} columns, got {np.asarray(data).shape[1]}")


def predict_proba(model: FilterModel, data) -> np.ndarray:
    """P(y = +1 | x) = 1 / (1 + exp(-2 f(x)))."""
    _check_names(model, data)
    f = model.linear_predictor(data)
    return 0.5 * (1.0 + np.tanh(f))


def classify(model: FilterModel, data, cutoff: float = 0.5) -> np.ndarray:
    """+1 where the predicted probability exceeds ``cutoff``, else -1."""
    if not 0.0 < cutoff < 1.0:
        raise ValueError(f"cutoff must lie in (0, 1), got {cutoff}")
    return np.where(predict_proba(model, data) > cutoff, 1, -1).astype(np.int8)


def with_lambda(cfg: SolverConfig, lam: float) -> SolverConfig:
    return replace(cfg, lam=float(lam))
