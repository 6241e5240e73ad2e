"""Numpy/scipy fallback for the compiled CSR kernels in ``_kernels.pyx``."""
import numpy as np
from scipy.sparse import csr_matrix

_CHUNK = 1 << 16


def _rows(indptr):
    return np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))


def spmm(indptr, indices, data, x):
    n_rows = len(indptr) - 1
    if len(indices) == 0:
        return np.zeros((n_rows, x.shape[1]))
    return np.asarray(csr_matrix((data, indices, indptr), shape=(n_rows, x.shape[0])) @ x)


def sddmm(indptr, indices, g, x):
    out = np.empty(len(indices))
    rows = _rows(indptr)
    for start in range(0, len(indices), _CHUNK):
        sl = slice(start, start + _CHUNK)
        out[sl] = np.einsum("ij,ij->i", g[rows[sl]], x[indices[sl]])
    return out
