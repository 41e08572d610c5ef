"""Hot elementwise kernels with a compiled core and a numpy fallback.

The compiled extension ``anls._ckernels`` is used when it was built;
setting ``ANLS_PURE_PYTHON=1`` forces the numpy implementation.  Both
accept arrays of any shape whose last axis is the spatial grid.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_impl = _pykernels
BACKEND = "python"
if os.environ.get("ANLS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def _as2d(u):
    u = np.asarray(u, dtype=np.complex128)
    shape = u.shape
    u = np.ascontiguousarray(u.reshape(1, 1) if not u.ndim else u.reshape(int(np.prod(shape[:-1])), shape[-1]))
    return u, shape


def nonlinearity(u, m: int, impl=None) -> np.ndarray:
    """``|u|^(m-2) u`` elementwise."""
    impl = impl or _impl
    u2, shape = _as2d(u)
    return np.asarray(impl.nonlinearity(u2, int(m))).reshape(shape)


def phase_rotate(u, coef: float, m: int, impl=None) -> np.ndarray:
    """``u exp(-i coef |u|^(m-2))`` elementwise."""
    impl = impl or _impl
    u2, shape = _as2d(u)
    return np.asarray(impl.phase_rotate(u2, float(coef), int(m))).reshape(shape)


def power_sum(u, p: float, impl=None) -> np.ndarray:
    """``sum |u|^p`` over the last axis."""
    if impl is None:
        # numpy's vectorised pow beats a scalar libm loop for fractional p
        impl = _impl if float(p).is_integer() else _pykernels
    u2, shape = _as2d(u)
    return np.asarray(impl.power_sum(u2, float(p))).reshape(shape[:-1])
