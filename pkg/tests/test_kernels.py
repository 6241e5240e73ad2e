import numpy as np
import pytest

from infoadv import _kernels_py, kernels
from infoadv.graph import SparseMatrix


def _csr(seed, n=30, m=25, density=0.2):
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n, m)) * (rng.random((n, m)) < density)
    return SparseMatrix.from_dense(d), d


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("seed", range(5))
def test_fallback_matches_dense(seed):
    s, d = _csr(seed)
    x = np.random.default_rng(seed + 10).standard_normal((d.shape[1], 4))
    out = kernels.spmm(s.indptr, s.indices, s.data, x, impl=_kernels_py)
    assert np.max(np.abs(out - d @ x)) < 1e-12
    g = np.random.default_rng(seed + 20).standard_normal((d.shape[0], 4))
    dots = kernels.sddmm(s.indptr, s.indices, g, x, impl=_kernels_py)
    rows = np.repeat(np.arange(d.shape[0]), np.diff(s.indptr))
    assert np.max(np.abs(dots - np.einsum("ij,ij->i", g[rows], x[s.indices]))) < 1e-12


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
@pytest.mark.parametrize("seed", range(5))
def test_compiled_matches_fallback(seed):
    from infoadv import _kernels

    s, d = _csr(seed, n=50, m=40)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((40, 7))
    g = rng.standard_normal((50, 7))
    a = kernels.spmm(s.indptr, s.indices, s.data, x, impl=_kernels)
    b = kernels.spmm(s.indptr, s.indices, s.data, x, impl=_kernels_py)
    assert np.max(np.abs(a - b)) < 1e-12
    a = kernels.sddmm(s.indptr, s.indices, g, x, impl=_kernels)
    b = kernels.sddmm(s.indptr, s.indices, g, x, impl=_kernels_py)
    assert np.max(np.abs(a - b)) < 1e-12


def test_empty_rows_and_matrix():
    s = SparseMatrix.from_dense(np.zeros((3, 2)))
    x = np.ones((2, 2))
    assert np.array_equal(kernels.spmm(s.indptr, s.indices, s.data, x), np.zeros((3, 2)))
    assert kernels.sddmm(s.indptr, s.indices, np.ones((3, 2)), x).shape == (0,)


def test_env_forces_fallback():
    import os
    import subprocess
    import sys

    env = {**os.environ, "INFOADV_KERNELS": "python"}
    out = subprocess.run([sys.executable, "-c", "from infoadv import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
