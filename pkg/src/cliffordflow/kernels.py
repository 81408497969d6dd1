"""Backend dispatch for the blade-bilinear kernel.

The compiled extension (``_kernels``) is used when it was built; otherwise a
numpy implementation with identical semantics is selected at import time.
``use_backend`` switches explicitly, mainly for tests and benchmarks.
"""
from __future__ import annotations

import numpy as np

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

AVAILABLE = ("cython", "numpy") if _compiled is not None else ("numpy",)
_backend = AVAILABLE[0]


def backend() -> str:
    return _backend


class use_backend:
    """Select a backend; as a context manager the previous one is restored on exit."""

    def __init__(self, name: str):
        global _backend
        if name not in AVAILABLE:
            raise ValueError(f"backend {name!r} not available; have {AVAILABLE}")
        self.previous = _backend
        _backend = name

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        global _backend
        _backend = self.previous
        return False


def _numpy_blade_bilinear(a, b, coef, target):
    n_rows, n_chan, _ = a.shape
    dense = np.zeros((coef.shape[0], 16, 16, 16))
    ii, jj = np.meshgrid(np.arange(16), np.arange(16), indexing="ij")
    dense[:, ii, jj, target] = coef
    dense = dense.reshape(coef.shape[0], 256, 16)
    pairs = (a[:, :, :, None] * b[:, :, None, :]).reshape(n_rows, n_chan, 256)
    if coef.shape[0] == 1:
        return (pairs.reshape(-1, 256) @ dense[0]).reshape(n_rows, n_chan, 16)
    return np.einsum("mcx,cxk->mck", pairs, dense)


def blade_bilinear(a: np.ndarray, b: np.ndarray, coef: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Apply a table-defined bilinear product over broadcast inputs.

    ``a`` and ``b`` broadcast to ``(..., C, 16)``. ``coef`` is ``(16, 16)``
    (shared by all channels) or ``(C, 16, 16)`` (one table per channel, the
    channel axis being the second-to-last axis of the inputs).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    coef = np.asarray(coef, dtype=np.float64)
    if coef.ndim == 2:
        coef = coef[None]
        a, b = np.broadcast_arrays(a, b)
        shape = a.shape
        a3 = np.ascontiguousarray(a.reshape(-1, 1, 16))
        b3 = np.ascontiguousarray(b.reshape(-1, 1, 16))
    else:
        a, b = np.broadcast_arrays(a, b)
        shape = a.shape
        if len(shape) < 2 or shape[-2] != coef.shape[0]:
            raise ValueError(f"channel axis {shape[-2:-1]} does not match {coef.shape[0]} coefficient tables")
        a3 = np.ascontiguousarray(a.reshape(-1, shape[-2], 16))
        b3 = np.ascontiguousarray(b.reshape(-1, shape[-2], 16))
    coef = np.ascontiguousarray(coef)
    target = np.ascontiguousarray(target, dtype=np.int64)
    if _backend == "cython":
        out = _compiled.blade_bilinear(a3, b3, coef, target)
    else:
        out = _numpy_blade_bilinear(a3, b3, coef, target)
    return out.reshape(shape)
