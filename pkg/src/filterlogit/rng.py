"""SplitMix64 streams for bootstrap resampling.

Each bag gets its own stream keyed by ``seed ^ bag_index``, so resamples do
not depend on execution order and are identical across platforms.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of the SplitMix64 generator started at ``seed``."""
    state = np.uint64(seed & _MASK64)
    k = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = state + k * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        z = z ^ (z >> np.uint64(31))
    return z


def uniform(seed: int, count: int) -> np.ndarray:
    """Doubles in [0, 1) from the top 53 bits of each output."""
    return (splitmix64(seed, count) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def bootstrap_indices(seed: int, n: int, size: int | None = None) -> np.ndarray:
    """Indices drawn uniformly with replacement from range(n)."""
    size = n if size is None else size
    idx = np.floor(uniform(seed, size) * n).astype(np.intp)
    return np.minimum(idx, n - 1)


def bag_seed(rng_seed: int, bag_index: int) -> int:
    return (rng_seed ^ bag_index) & _MASK64
