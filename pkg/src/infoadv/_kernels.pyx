# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CSR kernels used by the sparse propagation step.

Both kernels walk rows in order and accumulate left to right, so results are
deterministic and match the numpy fallback to rounding.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def spmm(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
         const double[::1] data, const double[:, ::1] x):
    """Return ``A @ x`` for a CSR matrix ``A`` given by its three arrays."""
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t n_cols = x.shape[1]
    out_arr = np.zeros((n_rows, n_cols), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, c
    cdef cnp.int64_t j
    cdef double w
    with nogil:
        for i in range(n_rows):
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                w = data[k]
                for c in range(n_cols):
                    out[i, c] += w * x[j, c]
    return out_arr


def sddmm(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
          const double[:, ::1] g, const double[:, ::1] x):
    """Return ``out[k] = <g[row(k)], x[col(k)]>`` for every stored entry ``k``."""
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t n_cols = x.shape[1]
    cdef Py_ssize_t nnz = indices.shape[0]
    out_arr = np.zeros(nnz, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, k, c
    cdef cnp.int64_t j
    cdef double acc
    with nogil:
        for i in range(n_rows):
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                acc = 0.0
                for c in range(n_cols):
                    acc += g[i, c] * x[j, c]
                out[k] = acc
    return out_arr
