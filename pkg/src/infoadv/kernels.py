"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``INFOADV_KERNELS=python`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("INFOADV_KERNELS", "").lower() == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def _prep(indptr, indices):
    return (
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
    )


def spmm(indptr, indices, data, x, impl=None):
    """Sparse (CSR) times dense product."""
    impl = impl or _impl
    indptr, indices = _prep(indptr, indices)
    return impl.spmm(
        indptr,
        indices,
        np.ascontiguousarray(data, dtype=np.float64),
        np.ascontiguousarray(x, dtype=np.float64),
    )


def sddmm(indptr, indices, g, x, impl=None):
    """Per-stored-entry dot products ``<g[row], x[col]>`` (gradient of spmm w.r.t. values)."""
    impl = impl or _impl
    indptr, indices = _prep(indptr, indices)
    return impl.sddmm(
        indptr,
        indices,
        np.ascontiguousarray(g, dtype=np.float64),
        np.ascontiguousarray(x, dtype=np.float64),
    )
