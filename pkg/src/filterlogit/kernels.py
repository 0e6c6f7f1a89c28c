"""Backend selection for the hot kernels.

The compiled extension is used when importable; set
``FILTERLOGIT_BACKEND=python`` to force the NumPy fallback.
"""

import os

from . import _pykernels

GINI = _pykernels.GINI
ENTROPY = _pykernels.ENTROPY
GAIN_TIE_EPS = _pykernels.GAIN_TIE_EPS


def _load(name: str):
    if name == "python":
        return _pykernels
    from . import _kernels

    return _kernels


def get_backend(name: str):
    """Return the kernel module for ``"compiled"`` or ``"python"``."""
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    return _load(name)


_requested = os.environ.get("FILTERLOGIT_BACKEND", "compiled")
try:
    _impl = _load(_requested)
    BACKEND = "python" if _impl is _pykernels else "compiled"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

split_scan = _impl.split_scan
marginal_cuts = _impl.marginal_cuts
column_cuts = _impl.column_cuts
level_matvec = _impl.level_matvec
level_sums = _impl.level_sums
cd_quadratic = _impl.cd_quadratic
kmeans_1d = _impl.kmeans_1d
