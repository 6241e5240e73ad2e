"""Contrastive and KL objectives.

``similarity`` is cosine similarity after the projection head. The InfoNCE
term follows the two-negative-set form: inter-view negatives pair the
*sampled* anchor ``u_i`` with ``v_k^mu``; intra-view negatives pair ``u_i^mu``
with ``u_k^mu``; the positive pairs ``u_i^mu`` with ``v_i^mu``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

NORM_FLOOR = 1e-12


def similarity(x, y, head=None) -> float:
    """Cosine similarity of two rows after the (optional) projection head."""
    x = ad.as_tensor(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    y = ad.as_tensor(np.atleast_2d(np.asarray(y, dtype=np.float64)))
    with ad.no_record():
        if head is not None:
            x, y = head(x), head(y)
        px = ad.row_normalize_l2(x, NORM_FLOOR).value[0]
        py = ad.row_normalize_l2(y, NORM_FLOOR).value[0]
    return float(px @ py)


def _unit(t: Tensor, head) -> Tensor:
    return ad.row_normalize_l2(head(t) if head is not None else t, NORM_FLOOR)


def infonce_rows(anchor_mu: Tensor, other_mu: Tensor, anchor: Tensor, tau: float) -> Tensor:
    """Per-node InfoNCE loss (N x 1) on unit-normalized inputs.

    Row ``i`` is ``-log(e^{pos_i} / (e^{pos_i} + sum_k!=i e^{inter_ik} + sum_k!=i e^{intra_ik}))``
    with ``pos_i = <anchor_mu_i, other_mu_i>/tau``, ``inter_ik = <anchor_i, other_mu_k>/tau``
    and ``intra_ik = <anchor_mu_i, anchor_mu_k>/tau``.
    """
    n = anchor_mu.shape[0]
    if n < 2:
        raise ValueError("InfoNCE needs at least two nodes (no negatives otherwise)")
    inv = 1.0 / tau
    pos = ad.scale(ad.reduce_sum(ad.mul(anchor_mu, other_mu), axis=1), inv)
    inter = ad.scale(ad.matmul(anchor, ad.transpose(other_mu)), inv)
    intra = ad.scale(ad.matmul(anchor_mu, ad.transpose(anchor_mu)), inv)
    logits = ad.concat_cols([pos, inter, intra])
    off = ~np.eye(n, dtype=bool)
    mask = np.concatenate([np.ones((n, 1), dtype=bool), off, off], axis=1)
    return ad.sub(ad.logsumexp_rows(logits, mask), pos)


def l1(i: int, U, U_mu, V_mu, tau: float, head=None) -> float:
    """InfoNCE loss of node ``i`` with ``U_mu`` as anchor view (values only)."""
    with ad.no_record():
        rows = infonce_rows(_unit(ad.as_tensor(U_mu), head), _unit(ad.as_tensor(V_mu), head),
                            _unit(ad.as_tensor(U), head), tau)
    return float(rows.value[i, 0])


def J1(U: Tensor, U_mu: Tensor, V: Tensor, V_mu: Tensor, tau: float, head=None) -> Tensor:
    """Symmetric InfoNCE objective averaged over 2N anchors."""
    U, U_mu, V, V_mu = map(ad.as_tensor, (U, U_mu, V, V_mu))
    pu, pum, pv, pvm = (_unit(t, head) for t in (U, U_mu, V, V_mu))
    n = U.shape[0]
    both = ad.add(infonce_rows(pum, pvm, pu, tau), infonce_rows(pvm, pum, pv, tau))
    return ad.scale(ad.reduce_sum(both), 1.0 / (2 * n))


def kl_rows(mu: Tensor, sigma: Tensor) -> Tensor:
    """``sum_d 0.5 (sigma^2 + mu^2 - 2 log sigma - 1)`` per row (N x 1)."""
    mu, sigma = ad.as_tensor(mu), ad.as_tensor(sigma)
    if np.any(sigma.value <= 0):
        raise ValueError("sigma must be strictly positive")
    inner = ad.add_scalar(ad.sub(ad.add(ad.square(sigma), ad.square(mu)), ad.scale(ad.log(sigma), 2.0)), -1.0)
    return ad.scale(ad.reduce_sum(inner, axis=1), 0.5)


def l2(mu_row, sigma_row) -> float:
    """KL(N(mu, sigma^2) || N(0, 1)) summed over dimensions of one row."""
    mu = np.atleast_2d(np.asarray(mu_row, dtype=np.float64))
    sigma = np.atleast_2d(np.asarray(sigma_row, dtype=np.float64))
    with ad.no_record():
        return kl_rows(Tensor(mu), Tensor(sigma)).item()


def J2_prime(U_mu: Tensor, U_sigma: Tensor) -> Tensor:
    """Mean KL over the first (generated) view."""
    return ad.reduce_mean(kl_rows(U_mu, U_sigma))


def J2(U_mu: Tensor, U_sigma: Tensor, V_mu: Tensor, V_sigma: Tensor) -> Tensor:
    """Mean KL over both views."""
    both = ad.add(kl_rows(U_mu, U_sigma), kl_rows(V_mu, V_sigma))
    return ad.scale(ad.reduce_sum(both), 1.0 / (2 * U_mu.shape[0]))


@dataclass
class LossBundle:
    J1: Tensor
    J2: Tensor
    J2_prime: Tensor
    lam: float
    tau_nce: float

    def scalars(self) -> dict[str, float]:
        return {
            "J1": self.J1.item(),
            "J2": self.J2.item(),
            "J2prime": self.J2_prime.item(),
            "encoder_loss": self.J1.item() + self.lam * self.J2.item(),
        }


def encoder_loss(bundle: LossBundle) -> Tensor:
    """``J1 + lambda * J2``."""
    if bundle.lam == 0.0:
        return bundle.J1
    return ad.add(bundle.J1, ad.scale(bundle.J2, bundle.lam))


def generator_loss(bundle: LossBundle, objective: str = "kl") -> Tensor:
    """``J2'`` (default) or, with ``objective='infonce'``, the negated InfoNCE loss."""
    if objective == "kl":
        return bundle.J2_prime
    if objective == "infonce":
        return ad.scale(bundle.J1, -1.0)
    raise ValueError(f"unknown generator objective {objective!r}")
