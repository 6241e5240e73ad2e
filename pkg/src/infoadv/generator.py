"""Learnable edge-dropping view generator.

A one-layer GCN embeds nodes, an MLP scores every undirected edge from the
concatenated endpoint embeddings ``[h_i ; h_j]`` (i < j), scores are squashed
into the drop-probability interval ``[a, b]``, and a binary-concrete sampler
turns them into a differentiable keep mask.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .encoder import glorot
from .graph import Graph, SparseMatrix, self_loop_struct, sym_normalize

PROB_CLAMP = 1e-6


class ViewGenerator:
    """Edge scorer with parameters under ``generator.*``."""

    def __init__(self, in_dim: int, hidden_dim: int = 64, bounds=(0.0, 0.5),
                 temperature: float = 0.5, seed=0):
        a, b = bounds
        if not 0.0 <= a <= b <= 1.0:
            raise ValueError(f"drop-probability bounds must satisfy 0 <= a <= b <= 1, got {bounds}")
        if temperature <= 0:
            raise ValueError(f"relaxation temperature must be positive, got {temperature}")
        self.in_dim, self.hidden_dim = in_dim, hidden_dim
        self.bounds = (float(a), float(b))
        self.temperature = float(temperature)
        rng = np.random.default_rng(seed)
        p = self.params = ParamStore()
        p.add("generator.gnn", glorot(rng, in_dim, hidden_dim))
        p.add("generator.mlp1_weight", glorot(rng, 2 * hidden_dim, hidden_dim))
        p.add("generator.mlp1_bias", np.zeros((1, hidden_dim)))
        p.add("generator.mlp2_weight", glorot(rng, hidden_dim, 1))
        p.add("generator.mlp2_bias", np.zeros((1, 1)))

    def raw_scores(self, g: Graph, adj_norm: SparseMatrix) -> Tensor:
        p = self.params
        h = ad.relu(ad.spmm(adj_norm, ad.matmul(ad.as_tensor(g.features), p["generator.gnn"])))
        pair = ad.concat_cols([ad.gather_rows(h, g.edges[:, 0]), ad.gather_rows(h, g.edges[:, 1])])
        hid = ad.relu(ad.add(ad.matmul(pair, p["generator.mlp1_weight"]), p["generator.mlp1_bias"]))
        return ad.add(ad.matmul(hid, p["generator.mlp2_weight"]), p["generator.mlp2_bias"])


def edge_scores(gen: ViewGenerator, g: Graph, adj_norm: SparseMatrix | None = None) -> Tensor:
    """Drop probability in ``[a, b]`` for every undirected edge (|E| x 1)."""
    if adj_norm is None:
        adj_norm = sym_normalize(g)
    a, b = gen.bounds
    return ad.add_scalar(ad.scale(ad.sigmoid(gen.raw_scores(g, adj_norm)), b - a), a)


def logistic_noise(shape, seed) -> np.ndarray:
    """``log u - log(1 - u)`` for ``u ~ Uniform(0, 1)``."""
    u = np.random.default_rng(seed).random(shape)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    return np.log(u) - np.log1p(-u)


def sample_mask(s: Tensor, temperature: float, seed=None, hard: bool = True,
                noise: np.ndarray | None = None) -> Tensor:
    """Binary-concrete keep mask for drop probabilities ``s``.

    ``drop = sigmoid((logit(s) + L) / t)``, ``keep = 1 - drop``. With ``hard``
    the forward value is ``keep > 0.5`` and the gradient is the relaxed one.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if noise is None:
        noise = logistic_noise(s.shape, seed)
    sc = ad.clamp(s, PROB_CLAMP, 1.0 - PROB_CLAMP)
    logit = ad.sub(ad.log(sc), ad.log(ad.add_scalar(ad.scale(sc, -1.0), 1.0)))
    drop = ad.sigmoid(ad.scale(ad.add(logit, ad.Tensor(noise)), 1.0 / temperature))
    keep = ad.add_scalar(ad.scale(drop, -1.0), 1.0)
    if hard:
        return ad.straight_through((keep.value > 0.5).astype(np.float64), keep)
    return keep


class NormalizedView:
    """Differentiable normalized propagation matrix for an edge-weighted graph.

    ``values`` (nnz x 1) holds ``w_ij / sqrt(d_i d_j)`` over the pattern of
    ``A + I`` where ``d`` are the weighted degrees including the self-loop.
    """

    def __init__(self, g: Graph, keep: Tensor):
        struct, ids = self_loop_struct(g)
        self.struct = struct
        n = g.num_nodes
        # entries on the diagonal pick the trailing constant 1
        idx = np.where(ids >= 0, ids, g.num_edges)
        w = ad.gather_rows(ad.concat_rows([keep, ad.Tensor(np.ones((1, 1)))]), idx)
        deg = ad.spmm(struct, ad.Tensor(np.ones((n, 1))), w)
        dinv = ad.pow_scalar(deg, -0.5)
        self.values = ad.mul(ad.mul(w, ad.gather_rows(dinv, struct.rows)), ad.gather_rows(dinv, struct.indices))

    def matrix(self) -> SparseMatrix:
        return self.struct.with_data(self.values.value[:, 0]).pruned()


@dataclass
class View:
    adj: SparseMatrix
    mask: Tensor
    norm: NormalizedView
    scores: Tensor


def generate_view(gen: ViewGenerator, g: Graph, temperature: float | None = None, seed=None,
                  hard: bool = True, adj_norm: SparseMatrix | None = None,
                  noise: np.ndarray | None = None) -> View:
    """Sample a generated view: masked adjacency ``A * R`` plus its differentiable normalization."""
    t = gen.temperature if temperature is None else temperature
    s = edge_scores(gen, g, adj_norm)
    keep = sample_mask(s, t, seed=seed, hard=hard, noise=noise)
    # both orientations share the single mask value of their undirected edge
    n = g.num_nodes
    keys = g.edges[:, 0] * n + g.edges[:, 1]
    lo = np.minimum(g.adj.rows, g.adj.indices)
    hi = np.maximum(g.adj.rows, g.adj.indices)
    weights = keep.value[np.searchsorted(keys, lo * n + hi), 0]
    adj = g.adj.with_data(weights).pruned()
    return View(adj, keep, NormalizedView(g, keep), s)


def edge_preserve_rate(mask) -> float:
    """Fraction of edges kept (mask entries above 0.5)."""
    v = mask.value if isinstance(mask, Tensor) else np.asarray(mask, dtype=np.float64)
    if v.size == 0:
        return 1.0
    return float(np.mean(v > 0.5))
