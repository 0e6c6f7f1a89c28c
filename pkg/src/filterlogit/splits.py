"""Supervised threshold estimation by CART-style split search.

Cuts are found marginally per covariate, optionally on bootstrap resamples
("bags"), and the pooled intermediate cuts are aggregated by their mean or by
one-dimensional K-means.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .data import Dataset, to_01
from .rng import bag_seed, bootstrap_indices


class SplitCriterion(enum.Enum):
    GINI = "gini"
    ENTROPY = "entropy"

    @property
    def code(self) -> int:
        return kernels.GINI if self is SplitCriterion.GINI else kernels.ENTROPY


def _criterion(c) -> SplitCriterion:
    return c if isinstance(c, SplitCriterion) else SplitCriterion(str(c).lower())


def impurity(p_hat: float, criterion=SplitCriterion.GINI) -> float:
    """Node impurity: 2p(1-p) for Gini, binary entropy (nats) otherwise."""
    if not 0.0 <= p_hat <= 1.0:
        raise ValueError(f"probability out of range: {p_hat}")
    if _criterion(criterion) is SplitCriterion.GINI:
        return 2.0 * p_hat * (1.0 - p_hat)
    h = 0.0
    for q in (p_hat, 1.0 - p_hat):
        if q > 0.0:
            h -= q * math.log(q)
    return h


@dataclass(frozen=True)
class Split:
    cut: float
    gain: float


def best_split(x, y, region: tuple[float, float] | None = None, criterion=SplitCriterion.GINI) -> Split | None:
    """Impurity-reduction maximizing cut of ``x`` for labels ``y``.

    Candidates are midpoints of adjacent distinct sorted values inside
    ``region`` (closed interval; whole line if None). Left child is x < cut.
    Returns None when no candidate yields a positive gain.
    """
    x = np.asarray(x, dtype=float)
    y01 = to_01(y).astype(float) if len(y) else np.zeros(0)
    if region is not None:
        lo, hi = region
        m = (x >= lo) & (x <= hi)
        x, y01 = x[m], y01[m]
    if x.size < 2:
        return None
    order = np.argsort(x, kind="stable")
    xs = np.ascontiguousarray(x[order])
    cut, gain, pos = kernels.split_scan(xs, np.ascontiguousarray(y01[order]), np.ones(xs.size), 0, xs.size,
                                        _criterion(criterion).code)
    if pos < 0:
        return None
    return Split(cut, gain)


def marginal_thresholds(x, y, k_splits: int, criterion=SplitCriterion.GINI, weights=None) -> np.ndarray:
    """Greedy best-first partitioning of one covariate into at most k_splits cuts."""
    if k_splits < 1:
        raise ValueError("k_splits must be >= 1")
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    w = np.ones(x.size) if weights is None else np.asarray(weights, dtype=float)
    y01 = to_01(y).astype(float) if x.size else np.zeros(0)
    return kernels.marginal_cuts(
        np.ascontiguousarray(x[order]),
        np.ascontiguousarray(y01[order]),
        np.ascontiguousarray(w[order]),
        k_splits,
        _criterion(criterion).code,
    )


@dataclass(frozen=True)
class BaggingConfig:
    n_bags: int = 100
    rng_seed: int = 0
    max_depth_per_bag: int = 1

    def __post_init__(self):
        if self.n_bags < 1:
            raise ValueError("n_bags must be >= 1")
        if self.max_depth_per_bag < 1:
            raise ValueError("max_depth_per_bag must be >= 1")


class _Presorted:
    """Column-wise sort of X shared by all bags; a bag is a weight vector."""

    def __init__(self, X: np.ndarray, y01: np.ndarray):
        self.order = np.argsort(X, axis=0, kind="stable")
        self.xs = np.ascontiguousarray(np.take_along_axis(X, self.order, axis=0).T)
        self.ys = np.ascontiguousarray(y01.astype(float)[self.order].T)
        self.n = X.shape[0]

    def cuts(self, counts: np.ndarray, k_splits: int, crit: int) -> np.ndarray:
        w = np.ascontiguousarray(counts.astype(float)[self.order].T)
        return kernels.column_cuts(self.xs, self.ys, w, k_splits, crit)


def bagged_thresholds(data: Dataset, cfg: BaggingConfig, k_splits: int | None = None,
                      criterion=SplitCriterion.GINI, resample=None) -> list[np.ndarray]:
    """Pool the cuts found on ``cfg.n_bags`` bootstrap resamples, per covariate.

    Bag b draws n indices from the SplitMix64 stream seeded ``rng_seed ^ b``.
    A resample of size n with replacement is represented by per-sample counts,
    so each covariate is sorted once. ``resample(b, n)`` overrides the index
    draw (used by tests to force the identity resample).
    """
    k = cfg.max_depth_per_bag if k_splits is None else k_splits
    crit = _criterion(criterion).code
    pre = _Presorted(data.features, data.labels01)
    n = data.n
    pooled = [[] for _ in range(data.p)]
    for b in range(cfg.n_bags):
        idx = resample(b, n) if resample is not None else bootstrap_indices(bag_seed(cfg.rng_seed, b), n)
        counts = np.bincount(idx, minlength=n)
        cuts = pre.cuts(counts, k, crit)
        for j in range(data.p):
            row = cuts[j]
            pooled[j].append(row[~np.isnan(row)])
    return [np.concatenate(c) if c else np.zeros(0) for c in pooled]


def kmeans_1d(values, k: int, seed: int = 0, n_init: int = 50, max_iter: int = 100,
              tol: float = 1e-10) -> np.ndarray:
    """Sorted centers of a seeded k-means++ / Lloyd fit on scalar data.

    Keeps the restart with the smallest within-cluster sum of squares. All
    randomness comes from one numpy Generator seeded with ``seed``.
    """
    v = np.ascontiguousarray(np.sort(np.asarray(values, dtype=float)))
    if v.size == 0:
        raise ValueError("no values to cluster")
    k = min(k, np.unique(v).size)
    u = np.random.default_rng(seed).random((n_init, k))
    c, _ = kernels.kmeans_1d(v, k, u, max_iter, tol)
    return np.unique(c)


@dataclass
class ThresholdSet:
    """Per-covariate strictly increasing cut points (sentinels implicit)."""

    names: tuple[str, ...]
    cuts: list[np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.names = tuple(self.names)
        self.cuts = [np.asarray(c, dtype=float) for c in self.cuts]
        if len(self.names) != len(self.cuts):
            raise ValueError("one cut vector per covariate is required")
        for name, c in zip(self.names, self.cuts):
            if c.ndim != 1 or c.size < 1:
                raise ValueError(f"covariate {name!r} needs at least one cut")
            if not np.all(np.isfinite(c)) or np.any(np.diff(c) <= 0):
                raise ValueError(f"cuts for {name!r} must be finite and strictly increasing")

    @property
    def block_sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.cuts], dtype=int)

    @property
    def max_levels(self) -> int:
        return int(self.block_sizes.max()) if self.cuts else 0

    def to_json(self) -> list[dict]:
        return [{"covariate": n, "cuts": [float(v) for v in c]} for n, c in zip(self.names, self.cuts)]

    @classmethod
    def from_json(cls, doc: Sequence[dict]) -> "ThresholdSet":
        return cls(tuple(d["covariate"] for d in doc), [np.array(d["cuts"], dtype=float) for d in doc])

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def __eq__(self, other):
        if not isinstance(other, ThresholdSet):
            return NotImplemented
        return self.names == other.names and all(np.array_equal(a, b) for a, b in zip(self.cuts, other.cuts))


def aggregate_thresholds(intermediate: Sequence[np.ndarray], mode: str = "mean", k: int | None = None,
                         names: Sequence[str] | None = None, seed: int = 0) -> ThresholdSet:
    """Collapse pooled intermediate cuts into a ThresholdSet.

    ``mode="mean"`` gives one cut per covariate; ``mode="kmeans"`` gives the
    sorted, deduplicated centers of k clusters. Covariates with fewer distinct
    cuts than k fall back to that many clusters (listed in metadata). A
    covariate with no intermediate cut at all gets its cut at 0.0 and is
    listed under ``"no_cuts"``.
    """
    names = tuple(names) if names is not None else tuple(f"x{j + 1}" for j in range(len(intermediate)))
    cuts, fallback, empty = [], {}, []
    for name, vals in zip(names, intermediate):
        vals = np.asarray(vals, dtype=float)
        if vals.size == 0:
            empty.append(name)
            cuts.append(np.array([0.0]))
            continue
        if mode == "mean":
            cuts.append(np.array([vals.mean()]))
        elif mode == "kmeans":
            if k is None or k < 1:
                raise ValueError("kmeans aggregation needs k >= 1")
            n_distinct = np.unique(vals).size
            if n_distinct < k:
                fallback[name] = int(n_distinct)
            cuts.append(kmeans_1d(vals, k, seed=seed))
        else:
            raise ValueError(f"unknown aggregation mode {mode!r}")
    meta = {"mode": mode}
    if k is not None:
        meta["k"] = k
    if fallback:
        meta["kmeans_fallback"] = fallback
    if empty:
        meta["no_cuts"] = empty
    return ThresholdSet(names, cuts, meta)


def estimate_thresholds(data: Dataset, cfg: BaggingConfig, k: int = 1, criterion=SplitCriterion.GINI,
                        mode: str | None = None) -> ThresholdSet:
    """Bagged split search followed by aggregation.

    With k == 1 each bag contributes one cut per covariate and the mean is
    taken; with k > 1 each bag contributes up to k cuts and K-means(k) is used.
    """
    mode = mode or ("mean" if k == 1 else "kmeans")
    pooled = bagged_thresholds(data, cfg, k_splits=k, criterion=criterion)
    return aggregate_thresholds(pooled, mode=mode, k=k, names=data.feature_names, seed=cfg.rng_seed)
