"""Exact-enumeration checks of the latent-class identities and the data processing inequality."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


def tau(rho) -> float:
    """Class-collision probability ``sum_c rho(c)^2``."""
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho < 0) or abs(rho.sum() - 1.0) > 1e-9:
        raise ValueError("rho must be a probability vector")
    return float(np.sum(rho * rho))


def logistic_loss(x):
    return np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def hinge_loss(x):
    return np.maximum(0.0, 1.0 - np.asarray(x, dtype=np.float64))


LOSSES = {"logistic": logistic_loss, "hinge": hinge_loss}


@dataclass
class LatentClassSpec:
    """Finite latent-class model.

    ``rho[c]`` is the class distribution, ``supports[c]`` the node ids of
    class ``c`` with within-class probabilities ``probs[c]``, and
    ``embeddings[v]`` the representation of node ``v``.
    """

    rho: np.ndarray
    supports: list[np.ndarray]
    probs: list[np.ndarray]
    embeddings: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=np.float64)
        if abs(self.rho.sum() - 1.0) > 1e-9 or np.any(self.rho < 0):
            raise ValueError("rho must sum to 1")
        if not (len(self.supports) == len(self.probs) == len(self.rho)):
            raise ValueError("one support and one distribution per class")
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.supports = [np.asarray(s, dtype=np.int64) for s in self.supports]
        self.probs = [np.asarray(p, dtype=np.float64) for p in self.probs]
        for s, p in zip(self.supports, self.probs):
            if len(s) != len(p) or len(s) == 0:
                raise ValueError("each class needs a non-empty support with matching probabilities")
            if abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
                raise ValueError("each within-class distribution must sum to 1")

    @property
    def support_size(self) -> int:
        return sum(len(s) for s in self.supports)


def random_spec(rng: np.random.Generator, max_classes: int = 4, max_nodes: int = 5, dim: int = 3) -> LatentClassSpec:
    k = int(rng.integers(1, max_classes + 1))
    rho = rng.dirichlet(np.ones(k))
    supports, probs, start = [], [], 0
    for _ in range(k):
        m = int(rng.integers(1, max_nodes + 1))
        supports.append(np.arange(start, start + m))
        probs.append(rng.dirichlet(np.ones(m)))
        start += m
    return LatentClassSpec(rho, supports, probs, rng.standard_normal((start, dim)))


def contrastive_risk(spec: LatentClassSpec, loss: str = "logistic", max_support: int = 50):
    """Return ``(L_P, L_P_neq, L_P_eq)`` by exhaustive enumeration.

    Sampling scheme: ``(c+, c-) ~ rho^2``, ``(v, v+) ~ D_{c+}^2``, ``v- ~ D_{c-}``;
    the loss is applied to ``f(v)^T (f(v+) - f(v-))``. A conditional risk whose
    event has probability zero is returned as NaN.
    """
    if spec.support_size > max_support:
        raise ValueError(f"support of {spec.support_size} nodes exceeds enumeration cap {max_support}")
    ell = LOSSES[loss]
    f = spec.embeddings
    k = len(spec.rho)
    # risk[c+, c-] = E_{v, v+ ~ D_c+, v- ~ D_c-} ell(...)
    risk = np.zeros((k, k))
    for cp in range(k):
        sp, pp = spec.supports[cp], spec.probs[cp]
        for cn in range(k):
            sn, pn = spec.supports[cn], spec.probs[cn]
            total = 0.0
            for a, pa in zip(sp, pp):
                for b, pb in zip(sp, pp):
                    for c, pc in zip(sn, pn):
                        total += pa * pb * pc * float(ell(f[a] @ (f[b] - f[c])))
            risk[cp, cn] = total
    joint = np.outer(spec.rho, spec.rho)
    same = np.eye(k, dtype=bool)
    l_p = float(np.sum(joint * risk))
    p_eq = float(np.sum(joint[same]))
    p_neq = float(np.sum(joint[~same]))
    l_eq = float(np.sum(joint[same] * risk[same]) / p_eq) if p_eq > 0 else float("nan")
    l_neq = float(np.sum(joint[~same] * risk[~same]) / p_neq) if p_neq > 0 else float("nan")
    return l_p, l_neq, l_eq


def decomposition_gap(spec: LatentClassSpec, loss: str = "logistic") -> float:
    """``|L_P - ((1 - tau) L_neq + tau L_eq)|``; undefined conditionals carry zero weight."""
    l_p, l_neq, l_eq = contrastive_risk(spec, loss)
    t = tau(spec.rho)
    rhs = (0.0 if t == 1.0 else (1 - t) * l_neq) + (0.0 if t == 0.0 else t * l_eq)
    return abs(l_p - rhs)


# ---------------------------------------------------------------------------
# Mean Classifier vs logistic regression
# ---------------------------------------------------------------------------


def softmax_ce(w: np.ndarray, h: np.ndarray, y: np.ndarray) -> float:
    z = h @ w
    return float(np.mean(logsumexp(z, axis=1) - z[np.arange(len(y)), y]))


def _softmax_ce_grad(w, h, y):
    z = h @ w
    p = np.exp(z - logsumexp(z, axis=1, keepdims=True))
    p[np.arange(len(y)), y] -= 1.0
    return h.T @ p / len(y)


def check_mean_vs_lr(embeddings, labels, steps: int = 200, init_step: float = 1.0,
                     shrink: float = 0.5, armijo: float = 1e-4):
    """Initialize softmax regression at the class means and run backtracking gradient descent.

    Returns ``(L_T_mu, L_T_final, holds)`` where ``holds`` is ``L_T_final <= L_T_mu``.
    Every accepted step is checked to be non-increasing.
    """
    h = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    k = int(y.max()) + 1
    w = np.zeros((h.shape[1], k))
    for c in range(k):
        rows = h[y == c]
        if len(rows) == 0:
            raise ValueError(f"class {c} has no examples")
        w[:, c] = rows.mean(axis=0)
    start = loss = softmax_ce(w, h, y)
    for _ in range(steps):
        g = _softmax_ce_grad(w, h, y)
        gg = float(np.sum(g * g))
        if gg == 0.0:
            break
        eta = init_step
        while True:
            cand = w - eta * g
            new = softmax_ce(cand, h, y)
            if new <= loss - armijo * eta * gg:
                break
            eta *= shrink
            if eta < 1e-20:
                cand, new = w, loss
                break
        if new > loss:
            raise AssertionError("backtracking step increased the loss")
        w, loss = cand, new
    return start, loss, bool(loss <= start)


# ---------------------------------------------------------------------------
# Data processing inequality
# ---------------------------------------------------------------------------


@dataclass
class DiscreteChannelChain:
    """``X -> Y -> Z`` with ``p_x`` and row-stochastic ``p_y_given_x``, ``p_z_given_y``."""

    p_x: np.ndarray
    p_y_given_x: np.ndarray
    p_z_given_y: np.ndarray

    def __post_init__(self):
        self.p_x = np.asarray(self.p_x, dtype=np.float64)
        self.p_y_given_x = np.asarray(self.p_y_given_x, dtype=np.float64)
        self.p_z_given_y = np.asarray(self.p_z_given_y, dtype=np.float64)
        if abs(self.p_x.sum() - 1.0) > 1e-9 or np.any(self.p_x < 0):
            raise ValueError("p_x must be a probability vector")
        for name, m in (("p_y_given_x", self.p_y_given_x), ("p_z_given_y", self.p_z_given_y)):
            if np.any(m < 0) or not np.allclose(m.sum(axis=1), 1.0, atol=1e-9):
                raise ValueError(f"rows of {name} must be probability vectors")
        if self.p_y_given_x.shape[0] != len(self.p_x) or self.p_z_given_y.shape[0] != self.p_y_given_x.shape[1]:
            raise ValueError("channel shapes do not chain")
        if max(len(self.p_x), *self.p_y_given_x.shape, *self.p_z_given_y.shape) > 16:
            raise ValueError("alphabets are limited to 16 symbols")


def random_chain(rng: np.random.Generator, size: int = 4) -> DiscreteChannelChain:
    return DiscreteChannelChain(
        rng.dirichlet(np.ones(size)),
        rng.dirichlet(np.ones(size), size=size),
        rng.dirichlet(np.ones(size), size=size),
    )


def mutual_information(joint) -> float:
    """I(A;B) in nats from a joint probability table, with 0 log 0 = 0."""
    joint = np.asarray(joint, dtype=np.float64)
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))


def check_dpi(chain: DiscreteChannelChain, slack: float = 1e-12):
    """Return ``(I_XY, I_YZ, I_XZ, holds)`` with ``holds = I_XZ <= min(I_XY, I_YZ) + slack``."""
    j_xy = chain.p_x[:, None] * chain.p_y_given_x
    p_y = j_xy.sum(axis=0)
    j_yz = p_y[:, None] * chain.p_z_given_y
    j_xz = j_xy @ chain.p_z_given_y
    i_xy, i_yz, i_xz = (mutual_information(j) for j in (j_xy, j_yz, j_xz))
    return i_xy, i_yz, i_xz, bool(i_xz <= min(i_xy, i_yz) + slack)
