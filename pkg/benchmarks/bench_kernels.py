"""Time the compiled sparse kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--nodes 2708] [--degree 4] [--dim 128] [--repeat 20]

Prints one line per (kernel, backend) with the best wall time over the
repeats and the speedup of the compiled backend.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from infoadv import _kernels_py, kernels
from infoadv.graph import sbm_generate, self_loop_struct


def _time(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nodes", type=int, default=2708)
    p.add_argument("--degree", type=float, default=4.0, help="expected within-block degree")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    blocks = [args.nodes // 7] * 7
    g = sbm_generate(blocks, args.degree / blocks[0], 0.1 * args.degree / args.nodes, 8, 1.0, seed=args.seed)
    csr, _ = self_loop_struct(g)
    rng = np.random.default_rng(args.seed)
    vals = rng.random(len(csr.indices))
    x = rng.standard_normal((g.num_nodes, args.dim))
    gr = rng.standard_normal((g.num_nodes, args.dim))
    print(f"graph: {g.num_nodes} nodes, {g.num_edges} edges, {len(csr.indices)} stored entries, dim {args.dim}")

    impls = {"python": _kernels_py}
    try:
        from infoadv import _kernels

        impls["cython"] = _kernels
    except ImportError:
        print("compiled extension not built; timing the fallback only")

    for name, call in (
        ("spmm", lambda impl: kernels.spmm(csr.indptr, csr.indices, vals, x, impl=impl)),
        ("sddmm", lambda impl: kernels.sddmm(csr.indptr, csr.indices, gr, x, impl=impl)),
    ):
        times = {b: _time(lambda: call(impl), args.repeat) for b, impl in impls.items()}
        if "cython" in times:
            diff = np.max(np.abs(call(impls["cython"]) - call(impls["python"])))
            extra = f"  speedup {times['python'] / times['cython']:.2f}x  max|diff| {diff:.1e}"
        else:
            extra = ""
        cols = "  ".join(f"{b} {t * 1e3:8.3f} ms" for b, t in times.items())
        print(f"{name:6s} {cols}{extra}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
