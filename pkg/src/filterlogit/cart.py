"""Classification tree baseline (Gini, minimum split/leaf sizes, complexity cut).

Defaults mirror the usual rpart settings: min_split=20, min_leaf=7, cp=0.01,
max_depth=30. A node is split only when its Gini decrease, weighted by node
size and relative to the root impurity, is at least ``cp``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import to_pm1
from .rng import bag_seed, bootstrap_indices


@dataclass(frozen=True)
class TreeConfig:
    min_split: int = 20
    min_leaf: int = 7
    cp: float = 0.01
    max_depth: int = 30


@dataclass
class Tree:
    feature: list = field(default_factory=list)
    cut: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    prob: list = field(default_factory=list)

    def _add(self, prob) -> int:
        for lst, v in ((self.feature, -1), (self.cut, np.nan), (self.left, -1), (self.right, -1), (self.prob, prob)):
            lst.append(v)
        return len(self.prob) - 1

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=int)
        feat = np.array(self.feature)
        cut = np.array(self.cut)
        left = np.array(self.left)
        right = np.array(self.right)
        active = feat[node] >= 0
        while active.any():
            i = np.flatnonzero(active)
            nd = node[i]
            go_left = X[i, feat[nd]] < cut[nd]
            node[i] = np.where(go_left, left[nd], right[nd])
            active = feat[node] >= 0
        return np.array(self.prob)[node]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(np.array(self.feature) == -1))


def _best_node_split(Xs, ys, cfg: TreeConfig):
    """Best (feature, position, gain) over presorted node columns (p, m)."""
    p, m = ys.shape
    cy = np.cumsum(ys, axis=1)[:, :-1]
    nl = np.arange(1, m, dtype=float)[None, :]
    nr = m - nl
    P = cy[:, -1:] + ys[:, -1:]
    pl = cy
    pr = P - pl
    gl = pl * (nl - pl) / nl
    gr = pr * (nr - pr) / nr
    # weighted child impurity times m / 2; smaller is better
    child = gl + gr
    ok = (Xs[:, :-1] < Xs[:, 1:]) & (nl >= cfg.min_leaf) & (nr >= cfg.min_leaf)
    child = np.where(ok, child, np.inf)
    flat = int(np.argmin(child))
    j, k = divmod(flat, m - 1)
    if not np.isfinite(child[j, k]):
        return None
    parent = float(P[0, 0] * (m - P[0, 0]) / m)
    return j, k, 2.0 * (parent - float(child[j, k]))


def fit_tree(X, y, cfg: TreeConfig = TreeConfig()) -> Tree:
    """Grow a Gini tree; leaf value is the training fraction of positives."""
    X = np.asarray(X, dtype=float)
    y01 = (to_pm1(y) > 0).astype(float)
    n, _ = X.shape
    order = np.argsort(X, axis=0, kind="mergesort").T  # (p, n)
    root_imp = 2.0 * y01.mean() * (1 - y01.mean()) * n
    tree = Tree()
    stack = [(np.ones(n, dtype=bool), tree._add(float(y01.mean())), 0)]
    while stack:
        mask, node, depth = stack.pop()
        m = int(mask.sum())
        pos = y01[mask].sum()
        if m < cfg.min_split or depth >= cfg.max_depth or pos == 0 or pos == m:
            continue
        keep = mask[order]
        idx = order[keep].reshape(order.shape[0], m)
        Xs = np.take_along_axis(X.T, idx, axis=1)
        best = _best_node_split(Xs, y01[idx], cfg)
        if best is None:
            continue
        j, k, gain = best
        if root_imp <= 0 or gain / root_imp < cfg.cp:
            continue
        cut = 0.5 * (Xs[j, k] + Xs[j, k + 1])
        go_left = mask & (X[:, j] < cut)
        go_right = mask & ~go_left
        li = tree._add(float(y01[go_left].mean()))
        ri = tree._add(float(y01[go_right].mean()))
        tree.feature[node], tree.cut[node] = int(j), float(cut)
        tree.left[node], tree.right[node] = li, ri
        stack.append((go_right, ri, depth + 1))
        stack.append((go_left, li, depth + 1))
    return tree


def fit_bagged_trees(X, y, n_bags: int = 100, rng_seed: int = 0, cfg: TreeConfig = TreeConfig()) -> list[Tree]:
    """One tree per bootstrap resample; resamples use the same seeds as threshold bagging."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    out = []
    for b in range(n_bags):
        idx = bootstrap_indices(bag_seed(rng_seed, b), X.shape[0])
        yb = y[idx]
        if np.unique(yb).size < 2:
            continue
        out.append(fit_tree(X[idx], yb, cfg))
    return out


def bagged_proba(trees: list[Tree], X) -> np.ndarray:
    return np.mean([t.predict_proba(X) for t in trees], axis=0)
