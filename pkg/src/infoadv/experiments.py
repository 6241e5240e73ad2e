"""Experiment drivers shared by the CLI and the acceptance suite.

Sweep cells are independent (own graph copy, own seeds). With
``INFOADV_THREADS`` > 0 they run in a process pool of that size; results are
always returned in cell-key order, so outputs do not depend on completion
order.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

from . import autodiff as ad
from . import losses
from .config import TrainConfig, variant_config
from .encoder import init_params
from .evaluation import EvalReport, MeanClassifier, gcl_ge, link_predict_eval, linear_probe, probe_split
from .generator import ViewGenerator, generate_view, logistic_noise
from .graph import Graph, drop_edges_random, feature_mask, inject_noise, split_links, sym_normalize
from .trainer import train


def thread_count() -> int:
    raw = os.environ.get("INFOADV_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"INFOADV_THREADS must be an integer, got {raw!r}") from None
    return max(0, n)


def run_cells(fn: Callable, cells: Iterable, threads: int | None = None) -> list:
    """Apply ``fn`` to every cell; serial when ``threads`` is 0, results sorted by cell."""
    cells = sorted(cells)
    threads = thread_count() if threads is None else threads
    if threads <= 0 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, cells))


def embed(g: Graph, cfg: TrainConfig) -> np.ndarray:
    return train(g, cfg).embed(g)


def node_eval(embeddings, labels, seeds: Sequence[int] = (0, 1, 2), **probe_kw) -> EvalReport:
    """Linear-probe F1-micro on frozen embeddings, one random split per seed."""
    report = EvalReport("node")
    for s in seeds:
        report.add(s, f1_micro=linear_probe(embeddings, labels, seed=s, **probe_kw))
    return report


def link_eval_split(g: Graph, cfg: TrainConfig, split_seed: int, which: str = "test") -> tuple[float, float]:
    """Train on the training edges of one split, score held-out pairs; returns (AUC, AP)."""
    split = split_links(g, seed=split_seed)
    g_train = g.with_edges(split.train_edges)
    emb = train(g_train, cfg).embed(g_train)
    return link_predict_eval(emb, split, which)


def link_eval(g: Graph, cfg: TrainConfig, split_seeds: Sequence[int] = (0, 1, 2)) -> EvalReport:
    report = EvalReport("link")
    for s in split_seeds:
        auc, ap = link_eval_split(g, cfg, s)
        report.add(s, auc=auc, ap=ap)
    return report


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


class _NoiseCell:
    def __init__(self, g, cfg):
        self.g, self.cfg = g, cfg

    def __call__(self, cell):
        level, variant, seed = cell
        noisy = inject_noise(self.g, level, seed=[seed, 7])
        cfg = variant_config(self.cfg, variant).replace(seed=seed)
        return level, variant, seed, linear_probe(embed(noisy, cfg), noisy.labels, seed=seed)


def noise_sweep(g: Graph, cfg: TrainConfig, levels, variants=("infoadv", "grace"), seeds=(0, 1, 2),
                threads: int | None = None) -> list[tuple]:
    """Rows ``(level, variant, seed, f1)``; noise is drawn per (level, seed), shared across variants."""
    cells = [(float(h), v, int(s)) for h in levels for v in variants for s in seeds]
    return run_cells(_NoiseCell(g, cfg), cells, threads)


class _HparamCell:
    def __init__(self, g, cfg):
        self.g, self.cfg = g, cfg

    def __call__(self, cell):
        lam, p_ea, seed = cell
        cfg = self.cfg.replace(lam=lam, p_ea=p_ea, seed=seed)
        return lam, p_ea, seed, linear_probe(embed(self.g, cfg), self.g.labels, seed=seed)


def hparam_sweep(g: Graph, cfg: TrainConfig, lams, p_eas, seeds=(0,), threads: int | None = None) -> list[tuple]:
    """Rows ``(lam, p_ea, seed, f1)`` over the full grid."""
    cells = [(float(l), float(p), int(s)) for l in lams for p in p_eas for s in seeds]
    return run_cells(_HparamCell(g, cfg), cells, threads)


class _FreqCell:
    def __init__(self, g, cfg):
        self.g, self.cfg = g, cfg

    def __call__(self, cell):
        ratio, seed = cell
        res = train(self.g, self.cfg.replace(freq_ratio=ratio, seed=seed))
        f1 = linear_probe(res.embed(self.g), self.g.labels, seed=seed)
        return ratio, seed, f1, res.log.column("edge_preserve_rate").tolist()


def freq_sweep(g: Graph, cfg: TrainConfig, ratios=(1, 5, 10, 100), seeds=(0,), threads: int | None = None):
    """Returns ``(summary, trace)``: rows ``(ratio, seed, f1)`` and ``(ratio, seed, epoch, edge_preserve_rate)``."""
    out = run_cells(_FreqCell(g, cfg), [(int(r), int(s)) for r in ratios for s in seeds], threads)
    summary = [(r, s, f1) for r, s, f1, _ in out]
    trace = [(r, s, e, rate) for r, s, _, rates in out for e, rate in enumerate(rates, 1)]
    return summary, trace


# ---------------------------------------------------------------------------
# Generalization gap
# ---------------------------------------------------------------------------


def gcl_ge_run(g: Graph, cfg: TrainConfig, train_fraction: float = 0.10, split_seed: int = 0,
               rule: str = "inner", normalize: bool = True) -> dict:
    """Train while recording the Mean-Classifier loss on held-out nodes after every epoch.

    The class means come from a ``train_fraction`` node split; the pretext
    loss is the logged InfoNCE value. With ``normalize`` the embedding rows
    are scaled to unit length first, as in the linear probe, so the
    downstream loss reflects class geometry rather than embedding scale.
    Returns the two raw series and the per-epoch |GCL-GE|.
    """
    train_idx, test_idx = probe_split(g.labels, train_fraction, split_seed)
    adj = sym_normalize(g)
    downstream: list[float] = []

    def record(epoch, enc, head):
        emb = enc.embed(adj, g.features)
        if normalize:
            emb = emb / np.maximum(np.linalg.norm(emb, axis=1, keepdims=True), 1e-12)
        clf = MeanClassifier(emb, g.labels, train_idx, rule, num_classes=g.num_classes)
        downstream.append(clf.loss(emb[test_idx], g.labels[test_idx]))

    res = train(g, cfg, callback=record)
    pretext = res.log.column("J1")
    return {"pretext": pretext, "downstream": np.asarray(downstream), "gcl_ge": gcl_ge(pretext, downstream)}


# ---------------------------------------------------------------------------
# Whole-model gradient check
# ---------------------------------------------------------------------------


def model_grad_check(nodes: int = 8, feat_dim: int = 6, hidden: int = 8, lam: float = 0.1,
                     seed: int = 0, eps: float = 1e-4, activation: str = "relu",
                     temperature: float = 0.5) -> float:
    """Finite-difference check of generator -> masked view -> encoder -> ``J1 + lam * J2``.

    Uses a random graph, the relaxed (soft) mask and frozen noise everywhere,
    and checks every generator, encoder and projection-head parameter.
    Returns the maximum relative error.
    """
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(nodes, k=1)
    pick = rng.random(len(iu)) < 0.5
    pick[: nodes - 1] = True  # never empty
    g = Graph(nodes, np.stack([iu[pick], ju[pick]], 1), rng.standard_normal((nodes, feat_dim)),
              np.zeros(nodes, dtype=np.int64))
    enc, head = init_params(seed, feat_dim, hidden, activation=activation)
    gen = ViewGenerator(feat_dim, hidden, bounds=(0.0, 0.8), temperature=temperature, seed=seed + 1)
    params = gen.params.merged(enc.params, head.params)
    adj0 = sym_normalize(g)
    x1 = feature_mask(g.features, 0.2, seed + 2)
    x2 = feature_mask(g.features, 0.2, seed + 3)
    adj2 = sym_normalize(drop_edges_random(g, 0.2, seed + 4))
    gumbel = logistic_noise((g.num_edges, 1), seed + 5)
    eps_u = rng.standard_normal((nodes, enc.out_dim))
    eps_v = rng.standard_normal((nodes, enc.out_dim))

    def build():
        view = generate_view(gen, g, hard=False, adj_norm=adj0, noise=gumbel)
        U, U_mu, U_s = enc.encode(view.norm.struct, x1, noise=eps_u, edge_values=view.norm.values)
        V, V_mu, V_s = enc.encode(adj2, x2, noise=eps_v)
        return ad.add(losses.J1(U, U_mu, V, V_mu, 0.5, head),
                      ad.scale(losses.J2(U_mu, U_s, V_mu, V_s), lam))

    return ad.grad_check(build, params, eps=eps)
