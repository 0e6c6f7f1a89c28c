"""Thresholded indicator design, centering and the difference transform.

A covariate with cuts t_1 < ... < t_K puts a sample at level k when
t_k <= x < t_{k+1} (level 0 below t_1). The design column for level k is the
indicator of that level; level 0 is the implicit base. Under the difference
transform theta = T B the design becomes Z D, whose column k of block j is
the indicator of "level >= k". Designs are stored as an (n, p) matrix of level
indices, which represents both forms exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .splits import ThresholdSet


class BlockMismatch(ValueError):
    pass


def levels_of(X: np.ndarray, thresholds: ThresholdSet) -> np.ndarray:
    """Level index per sample and covariate (closed-left intervals)."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != len(thresholds.cuts):
        raise BlockMismatch(f"{X.shape[1]} columns but {len(thresholds.cuts)} threshold blocks")
    sizes = set(len(c) for c in thresholds.cuts)
    if len(sizes) == 1 and X.size:
        # equal block sizes: count cuts at or below each value
        C = np.vstack(thresholds.cuts)
        lev = np.zeros(X.shape, dtype=np.int32)
        for m in range(C.shape[1]):
            lev += X >= C[:, m]
        return lev
    lev = np.empty(X.shape, dtype=np.int32)
    for j, c in enumerate(thresholds.cuts):
        lev[:, j] = np.searchsorted(c, X[:, j], side="right")
    return lev


def _offsets(block_sizes) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(block_sizes)]).astype(int)


@dataclass(frozen=True)
class DifferenceTransform:
    """Block-diagonal first-difference operator and its cumulative-sum inverse."""

    block_sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(k) for k in self.block_sizes))

    @property
    def size(self) -> int:
        return sum(self.block_sizes)

    @property
    def offsets(self) -> np.ndarray:
        return _offsets(self.block_sizes)

    def _check(self, v) -> np.ndarray:
        v = np.asarray(v)
        if v.shape != (self.size,):
            raise BlockMismatch(f"expected a vector of length {self.size}, got shape {v.shape}")
        return v

    def blocks(self, v):
        off = self.offsets
        return [v[off[j]:off[j + 1]] for j in range(len(self.block_sizes))]

    def T_block(self, j: int) -> np.ndarray:
        k = self.block_sizes[j]
        return np.eye(k, dtype=np.int64) - np.eye(k, k=-1, dtype=np.int64)

    def D_block(self, j: int) -> np.ndarray:
        k = self.block_sizes[j]
        return np.tril(np.ones((k, k), dtype=np.int64))

    def T(self) -> np.ndarray:
        return _block_diag([self.T_block(j) for j in range(len(self.block_sizes))])

    def D(self) -> np.ndarray:
        return _block_diag([self.D_block(j) for j in range(len(self.block_sizes))])


def _block_diag(blocks) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=blocks[0].dtype if blocks else np.int64)
    o = 0
    for b in blocks:
        k = b.shape[0]
        out[o:o + k, o:o + k] = b
        o += k
    return out


def _uniform(t: DifferenceTransform) -> int:
    # common block size, or 0 when blocks differ
    s = set(t.block_sizes)
    return s.pop() if len(s) == 1 else 0


def to_theta(B, t: DifferenceTransform) -> np.ndarray:
    """Adjacent differences within each block (beta_0 = 0)."""
    B = t._check(B)
    k = _uniform(t)
    if k:
        return np.diff(B.reshape(-1, k), axis=1, prepend=B.dtype.type(0)).ravel()
    out = np.empty_like(B)
    for ob, ib in zip(t.blocks(out), t.blocks(B)):
        ob[...] = np.diff(ib, prepend=ib.dtype.type(0))
    return out


def from_theta(theta, t: DifferenceTransform) -> np.ndarray:
    """Cumulative sums within each block."""
    theta = t._check(theta)
    k = _uniform(t)
    if k:
        return np.cumsum(theta.reshape(-1, k), axis=1).ravel()
    out = np.empty_like(theta)
    for ob, ib in zip(t.blocks(out), t.blocks(theta)):
        ob[...] = np.cumsum(ib)
    return out


@dataclass(frozen=True)
class ThresholdedDesign:
    """Indicator design Z-hat, held as level indices; optionally centered."""

    levels: np.ndarray
    block_sizes: tuple[int, ...]
    centered: bool = False
    column_means: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.levels.shape[0]

    @property
    def K(self) -> int:
        return int(sum(self.block_sizes))

    def indicator_means(self) -> np.ndarray:
        """Empirical mean of every indicator column (level k >= 1 of each block)."""
        n = self.n
        out = []
        for j, k in enumerate(self.block_sizes):
            cnt = np.bincount(self.levels[:, j], minlength=k + 1)
            out.append(cnt[1:k + 1] / n)
        return np.concatenate(out) if out else np.zeros(0)

    def dense(self) -> np.ndarray:
        """The n x K indicator matrix, centered when the design is centered."""
        Z = np.zeros((self.n, self.K))
        off = _offsets(self.block_sizes)
        for j, k in enumerate(self.block_sizes):
            lev = self.levels[:, j]
            rows = np.flatnonzero(lev > 0)
            Z[rows, off[j] + lev[rows] - 1] = 1.0
        if self.centered:
            Z -= self.column_means
        return Z


def encode(X_or_data, thresholds: ThresholdSet) -> ThresholdedDesign:
    X = getattr(X_or_data, "features", X_or_data)
    lev = levels_of(X, thresholds)
    return ThresholdedDesign(np.ascontiguousarray(lev), tuple(int(k) for k in thresholds.block_sizes))


def center(design: ThresholdedDesign, column_means=None) -> ThresholdedDesign:
    """Subtract empirical (or supplied) column means; refuses centered input."""
    if design.centered:
        raise ValueError("design is already centered")
    m = design.indicator_means() if column_means is None else np.asarray(column_means, dtype=float)
    if m.shape != (design.K,):
        raise BlockMismatch(f"column_means has shape {m.shape}, expected ({design.K},)")
    return ThresholdedDesign(design.levels, design.block_sizes, True, m)


@dataclass(frozen=True)
class TransformedDesign:
    """Z D for a (possibly centered) thresholded design.

    Column k of block j is 1{level >= k} minus ``shift[k]``, where ``shift``
    is the suffix sum of the indicator means (zero when uncentered).
    Products with theta and with residual vectors run in O(n p).
    """

    levels: np.ndarray
    block_sizes: tuple[int, ...]
    shift: np.ndarray

    @property
    def n(self) -> int:
        return self.levels.shape[0]

    @property
    def K(self) -> int:
        return int(sum(self.block_sizes))

    @property
    def n_levels(self) -> int:
        return (max(self.block_sizes) if self.block_sizes else 0) + 1

    @cached_property
    def _index(self):
        # (block, level) position of every theta coordinate, and block starts
        sizes = np.asarray(self.block_sizes, dtype=int)
        rows = np.repeat(np.arange(sizes.size), sizes)
        starts = np.cumsum(sizes) - sizes
        cols = np.arange(int(sizes.sum())) - np.repeat(starts, sizes) + 1
        return rows, cols, starts

    def _table(self, theta: np.ndarray) -> np.ndarray:
        # row j holds B_j at levels 0..K_j (cumulative sums of theta_j)
        rows, cols, starts = self._index
        tab = np.zeros((len(self.block_sizes), self.n_levels))
        if theta.size:
            cs = np.cumsum(theta)
            base = np.concatenate([[0.0], cs])[starts]
            tab[rows, cols] = cs - base[rows]
        return tab

    def matvec(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        f = kernels.level_matvec(self.levels, self._table(theta))
        return f - float(theta @ self.shift)

    def rmatvec(self, r) -> np.ndarray:
        """Z-tilde transpose times r."""
        r = np.ascontiguousarray(r, dtype=float)
        rows, cols, _ = self._index
        S = kernels.level_sums(self.levels, r, self.n_levels)
        # suffix sums over levels give sums of r over {level >= k}
        suf = np.cumsum(S[:, ::-1], axis=1)[:, ::-1]
        return suf[rows, cols] - self.shift * r.sum()

    def dense(self) -> np.ndarray:
        Z = np.zeros((self.n, self.K))
        off = _offsets(self.block_sizes)
        for j, k in enumerate(self.block_sizes):
            lev = self.levels[:, j][:, None]
            Z[:, off[j]:off[j + 1]] = (lev >= np.arange(1, k + 1)[None, :]).astype(float)
        return Z - self.shift

    def subset(self, idx) -> "TransformedDesign":
        return TransformedDesign(np.ascontiguousarray(self.levels[idx]), self.block_sizes, self.shift)


def transform_design(design: ThresholdedDesign, t: DifferenceTransform | None = None) -> TransformedDesign:
    """Right-multiply each block by D_j (suffix sums along the level axis)."""
    if t is not None and tuple(t.block_sizes) != tuple(design.block_sizes):
        raise BlockMismatch(f"transform blocks {t.block_sizes} != design blocks {design.block_sizes}")
    if design.centered:
        shift = np.concatenate([
            np.cumsum(m[::-1])[::-1] for m in DifferenceTransform(design.block_sizes).blocks(design.column_means)
        ]) if design.block_sizes else np.zeros(0)
    else:
        shift = np.zeros(design.K)
    return TransformedDesign(design.levels, tuple(design.block_sizes), shift)
