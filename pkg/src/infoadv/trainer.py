"""Alternating optimization of the view generator and the target encoder.

Each iteration draws both views, takes one generator step on its objective
with the encoder frozen, and every ``freq_ratio``-th iteration one encoder +
projection-head step on ``J1 + lam * J2`` with the generator frozen. Both
steps use gradients evaluated at the pre-update parameters of the other
player and the same sampled view.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from . import losses
from .config import TrainConfig
from .encoder import ProjectionHead, TargetEncoder, init_params
from .generator import ViewGenerator, edge_preserve_rate, generate_view
from .graph import Graph, drop_edges_random, feature_mask, sym_normalize

LOG_FIELDS = ("epoch", "J1", "J2", "J2prime", "encoder_loss", "generator_loss", "edge_preserve_rate", "seconds")


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainLog:
    records: list[dict] = field(default_factory=list)

    def append(self, rec: dict) -> None:
        if self.records and rec["epoch"] != self.records[-1]["epoch"] + 1:
            raise ValueError("epochs must be recorded in order")
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records], dtype=np.float64)

    def __len__(self):
        return len(self.records)

    def to_csv(self, include_time: bool = False) -> str:
        """CSV text; ``seconds`` is left empty unless ``include_time`` so the file is reproducible."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_FIELDS)
        for r in self.records:
            row = [r["epoch"]] + [repr(float(r[k])) for k in LOG_FIELDS[1:-1]]
            row.append(repr(float(r["seconds"])) if include_time else "")
            w.writerow(row)
        return buf.getvalue()

    def write_csv(self, path, include_time: bool = False) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv(include_time))


@dataclass
class TrainResult:
    encoder: TargetEncoder
    head: ProjectionHead
    generator: ViewGenerator | None
    log: TrainLog
    config: TrainConfig
    encoder_steps: int = 0
    generator_steps: int = 0

    def __iter__(self):
        return iter((self.encoder, self.generator, self.log))

    def embed(self, g: Graph) -> np.ndarray:
        return self.encoder.embed(sym_normalize(g), g.features)


def build_models(g: Graph, cfg: TrainConfig):
    enc_seed, gen_seed, loop_seed = np.random.SeedSequence(cfg.seed).spawn(3)
    enc, head = init_params(enc_seed, g.feat_dim, cfg.hidden_dim, activation=cfg.activation)
    gen = None
    if cfg.use_generator:
        gen = ViewGenerator(g.feat_dim, cfg.gen_hidden_dim, bounds=(0.0, cfg.p_ea),
                            temperature=cfg.t_g, seed=gen_seed)
    return enc, head, gen, np.random.default_rng(loop_seed)


def _encode_both(enc, head, cfg, adj1, x1, adj2, x2, eps_u, eps_v, values1=None):
    U, U_mu, U_sigma = enc.encode(adj1, x1, noise=eps_u, edge_values=values1)
    V, V_mu, V_sigma = enc.encode(adj2, x2, noise=eps_v)
    return losses.LossBundle(
        J1=losses.J1(U, U_mu, V, V_mu, cfg.tau_nce, head),
        J2=losses.J2(U_mu, U_sigma, V_mu, V_sigma),
        J2_prime=losses.J2_prime(U_mu, U_sigma),
        lam=cfg.lam,
        tau_nce=cfg.tau_nce,
    )


def train(g: Graph, cfg: TrainConfig,
          callback: Callable[[int, TargetEncoder, ProjectionHead], None] | None = None) -> TrainResult:
    """Run ``cfg.epochs`` iterations and return the trained models and their log.

    ``callback(epoch, encoder, head)`` runs after every iteration (1-based epoch).
    """
    enc, head, gen, rng = build_models(g, cfg)
    enc_store = enc.params.merged(head.params)
    adj0 = sym_normalize(g)
    x = g.features
    n = g.num_nodes
    out_dim = enc.out_dim
    log = TrainLog()
    enc_steps = gen_steps = 0

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        s_f1, s_f2, s_e2, s_e1 = (int(v) for v in rng.integers(0, 2**63 - 1, size=4))
        eps_u = rng.standard_normal((n, out_dim))
        eps_v = rng.standard_normal((n, out_dim))
        x1 = feature_mask(x, cfg.p_f1, s_f1)
        x2 = feature_mask(x, cfg.p_f2, s_f2)
        adj2 = sym_normalize(drop_edges_random(g, cfg.p_e2, s_e2))

        try:
            if gen is not None:
                # generator step, encoder and head frozen
                enc_store.set_trainable(False)
                gen.params.set_trainable(True)
                with ad.record():
                    view = generate_view(gen, g, seed=s_e1, hard=cfg.hard_mask, adj_norm=adj0)
                    if cfg.generator_objective == "kl":
                        _, U_mu, U_sigma = enc.encode(view.norm.struct, x1, noise=eps_u,
                                                      edge_values=view.norm.values)
                        g_loss = losses.J2_prime(U_mu, U_sigma)
                    else:
                        bundle = _encode_both(enc, head, cfg, view.norm.struct, x1, adj2, x2,
                                              eps_u, eps_v, view.norm.values)
                        g_loss = losses.generator_loss(bundle, "infonce")
                ad.backward(g_loss)
                gen_loss_value = g_loss.item()
                keep = view.mask.value[:, 0].copy()
                ad.adam_step(gen.params, cfg.lr_generator, weight_decay=cfg.weight_decay)
                gen_steps += 1
                adj1 = sym_normalize(g, edge_weight=keep)
                preserve = edge_preserve_rate(keep)
            else:
                g1 = drop_edges_random(g, cfg.p_ea, s_e1)
                adj1 = sym_normalize(g1)
                preserve = g1.num_edges / g.num_edges if g.num_edges else 1.0
                gen_loss_value = float("nan")

            # encoder + head step, generator frozen
            if epoch % cfg.freq_ratio == 0:
                enc_store.set_trainable(True)
                with ad.record():
                    bundle = _encode_both(enc, head, cfg, adj1, x1, adj2, x2, eps_u, eps_v)
                    e_loss = losses.encoder_loss(bundle)
                ad.backward(e_loss)
                ad.adam_step(enc_store, cfg.lr_encoder, weight_decay=cfg.weight_decay)
                enc_steps += 1
            else:
                with ad.no_record():
                    bundle = _encode_both(enc, head, cfg, adj1, x1, adj2, x2, eps_u, eps_v)
        except ad.NonFiniteError as exc:
            raise TrainingDiverged(f"epoch {epoch}: {exc}") from exc

        vals = bundle.scalars()
        if gen is None:
            gen_loss_value = vals["J2prime"]
        rec = dict(epoch=epoch, generator_loss=gen_loss_value, edge_preserve_rate=preserve,
                   seconds=time.perf_counter() - t0, **vals)
        if not all(np.isfinite(rec[k]) for k in ("J1", "J2", "J2prime", "encoder_loss", "generator_loss")):
            raise TrainingDiverged(f"epoch {epoch}: non-finite loss")
        log.append(rec)
        if callback is not None:
            callback(epoch, enc, head)

    enc_store.set_trainable(True)
    if gen is not None:
        gen.params.set_trainable(True)
    return TrainResult(enc, head, gen, log, cfg, enc_steps, gen_steps)
