"""Target encoder: a two-layer GCN with a shared trunk and mean / std heads."""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor

ACTIVATIONS = ("relu", "prelu", "rrelu")
SIGMA_FLOOR = 1e-6
# fixed slope used in place of randomized leaky ReLU
RRELU_SLOPE = 0.2


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def activate(x: Tensor, kind: str, params: ParamStore | None = None, slope_name: str | None = None) -> Tensor:
    if kind == "relu":
        return ad.relu(x)
    if kind == "rrelu":
        return ad.leaky_relu(x, RRELU_SLOPE)
    if kind == "prelu":
        return ad.prelu(x, params[slope_name])
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


class TargetEncoder:
    """GCN trunk (D -> H) shared by a mean head and a std head (H -> H').

    Parameters live in ``self.params`` under ``encoder.*`` names.
    """

    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int | None = None,
                 activation: str = "relu", seed=0):
        if min(in_dim, hidden_dim, out_dim or hidden_dim) <= 0:
            raise ValueError("encoder dimensions must be positive")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")
        out_dim = out_dim or hidden_dim
        self.in_dim, self.hidden_dim, self.out_dim = in_dim, hidden_dim, out_dim
        self.activation = activation
        rng = np.random.default_rng(seed)
        p = self.params = ParamStore()
        p.add("encoder.layer1", glorot(rng, in_dim, hidden_dim))
        p.add("encoder.mu_head", glorot(rng, hidden_dim, out_dim))
        p.add("encoder.sigma_head", glorot(rng, hidden_dim, out_dim))
        if activation == "prelu":
            p.add("encoder.prelu_slope", np.full((1, 1), 0.25))

    def trunk(self, adj_norm, x, edge_values: Tensor | None = None) -> Tensor:
        """Shared first layer ``act(A_hat X W1)`` followed by one more propagation."""
        p = self.params
        xw = ad.matmul(ad.as_tensor(x), p["encoder.layer1"])
        hidden = activate(ad.spmm(adj_norm, xw, edge_values), self.activation, p, "encoder.prelu_slope")
        return ad.spmm(adj_norm, hidden, edge_values)

    def encode(self, adj_norm, x, noise: np.ndarray | None = None, seed=None,
               edge_values: Tensor | None = None):
        """Return ``(U, U_mu, U_sigma)``.

        ``U = U_mu + eps * U_sigma`` with ``eps`` either the given ``noise`` array
        or a standard normal draw from ``seed``. ``edge_values`` (nnz x 1)
        overrides ``adj_norm.data`` to make the propagation differentiable.
        """
        p = self.params
        agg = self.trunk(adj_norm, x, edge_values)
        u_mu = ad.matmul(agg, p["encoder.mu_head"])
        u_sigma = ad.add_scalar(ad.softplus(ad.matmul(agg, p["encoder.sigma_head"])), SIGMA_FLOOR)
        if noise is None:
            noise = np.random.default_rng(seed).standard_normal(u_mu.shape)
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != u_mu.shape:
            raise ValueError(f"noise shape {noise.shape} does not match {u_mu.shape}")
        u = ad.add(u_mu, ad.mul(Tensor(noise), u_sigma))
        return u, u_mu, u_sigma

    def embed(self, adj_norm, x) -> np.ndarray:
        """Mean embeddings for downstream use (no recording, no noise)."""
        with ad.no_record():
            agg = self.trunk(adj_norm, x)
            return ad.matmul(agg, self.params["encoder.mu_head"]).value.copy()


class ProjectionHead:
    """Two dense layers H' -> H' -> H' with ELU in between (``head.*`` parameters)."""

    def __init__(self, dim: int, seed=0):
        rng = np.random.default_rng(seed)
        self.dim = dim
        p = self.params = ParamStore()
        p.add("head.fc1_weight", glorot(rng, dim, dim))
        p.add("head.fc1_bias", np.zeros((1, dim)))
        p.add("head.fc2_weight", glorot(rng, dim, dim))
        p.add("head.fc2_bias", np.zeros((1, dim)))

    def __call__(self, z: Tensor) -> Tensor:
        if z.shape[1] != self.dim:
            raise ValueError(f"projection head expects {self.dim} columns, got {z.shape[1]}")
        p = self.params
        h = ad.elu(ad.add(ad.matmul(z, p["head.fc1_weight"]), p["head.fc1_bias"]))
        return ad.add(ad.matmul(h, p["head.fc2_weight"]), p["head.fc2_bias"])


def init_params(seed, in_dim: int, hidden_dim: int, out_dim: int | None = None,
                activation: str = "relu") -> tuple[TargetEncoder, ProjectionHead]:
    """Glorot-initialized encoder and projection head, deterministic per seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    enc_seed, head_seed = ss.spawn(2)
    enc = TargetEncoder(in_dim, hidden_dim, out_dim, activation, seed=enc_seed)
    return enc, ProjectionHead(enc.out_dim, seed=head_seed)
