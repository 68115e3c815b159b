"""Hot-loop kernels, compiled when available.

The Cython build (``dbg4eth._ckernels``) is used unless it failed to build or
``DBG4ETH_PURE_PYTHON=1`` is set, in which case :mod:`dbg4eth._pykernels` is
used. ``BACKEND`` names the active implementation.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

if os.environ.get("DBG4ETH_PURE_PYTHON") == "1":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def pava(y, w=None) -> np.ndarray:
    y = _f64(y)
    w = np.ones_like(y) if w is None else _f64(w)
    if y.size == 0:
        return y.copy()
    return _impl.pava(y, w)


def best_split(x, g, h, reg_lambda: float = 1.0, min_leaf: int = 1, min_hess: float = 1e-3):
    """Best threshold cut on a feature already sorted ascending.

    Returns ``(gain, n_left)``; ``n_left == 0`` means no cut improves the objective.
    """
    return _impl.best_split(_f64(x), _f64(g), _f64(h), float(reg_lambda), int(min_leaf), float(min_hess))


def bin_stats(conf, labels, n_bins: int):
    return _impl.bin_stats(_f64(conf), _f64(labels), int(n_bins))
