"""Self-contained verdicts behind ``infoadv theory-check``.

Each check returns a JSON-ready dict with ``check``, ``passed`` and the
quantities it computed.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import theory
from .generator import sample_mask
from .losses import kl_rows, l2


def check_decomposition(trials: int = 200, seed: int = 0, tolerance: float = 1e-12) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        spec = theory.random_spec(rng)
        for loss in ("logistic", "hinge"):
            worst = max(worst, theory.decomposition_gap(spec, loss))
    return {"check": "decomposition", "trials": trials, "max_gap": worst, "tolerance": tolerance,
            "passed": worst < tolerance}


def check_tau() -> dict:
    cases = {"uniform4": ([0.25] * 4, 0.25), "point": ([1.0], 1.0), "0.5,0.3,0.2": ([0.5, 0.3, 0.2], 0.38)}
    got = {k: theory.tau(r) for k, (r, _) in cases.items()}
    ok = all(abs(got[k] - want) < 1e-12 for k, (_, want) in cases.items())
    return {"check": "tau", "values": got, "passed": ok}


def check_kl(draws: int = 100_000, seed: int = 0, dim: int = 4, tolerance: float = 1e-12) -> dict:
    """Non-negativity, zero at the prior, and agreement with the closed form."""
    rng = np.random.default_rng(seed)
    mu = rng.standard_normal((draws, dim)) * rng.uniform(0.0, 3.0, size=(draws, 1))
    sigma = np.exp(rng.uniform(-4.0, 3.0, size=(draws, dim)))
    with ad.no_record():
        vals = kl_rows(ad.Tensor(mu), ad.Tensor(sigma)).value[:, 0]
    closed = np.sum(-np.log(sigma) + (sigma**2 + mu**2) / 2.0 - 0.5, axis=1)
    rel = np.abs(vals - closed) / np.maximum(1.0, np.abs(closed))
    at_prior = l2(np.zeros(dim), np.ones(dim))
    passed = bool(vals.min() >= 0.0 and at_prior == 0.0 and rel.max() <= tolerance)
    return {"check": "kl", "draws": draws, "min_value": float(vals.min()), "value_at_prior": at_prior,
            "max_rel_diff_closed_form": float(rel.max()), "passed": passed}


def check_sampler(probs=(0.1, 0.5, 0.9), draws: int = 10_000, temperature: float = 0.5,
                  seed: int = 0, sigmas: float = 4.0) -> dict:
    """Hard keep rate for drop probability ``s`` should be ``1 - s`` within binomial noise."""
    rows, ok = [], True
    for k, s in enumerate(probs):
        with ad.no_record():
            keep = sample_mask(ad.Tensor(np.full((draws, 1), s)), temperature, seed=[seed, k], hard=True)
        rate = float(keep.value.mean())
        sd = float(np.sqrt(s * (1 - s) / draws))
        z = abs(rate - (1 - s)) / sd
        ok &= z <= sigmas
        rows.append({"drop_probability": s, "keep_rate": rate, "expected": 1 - s, "z": z})
    return {"check": "sampler", "draws": draws, "results": rows, "passed": bool(ok)}


def check_dpi(trials: int = 1000, seed: int = 0, size: int = 4) -> dict:
    rng = np.random.default_rng(seed)
    violations, worst = 0, -np.inf
    for _ in range(trials):
        i_xy, i_yz, i_xz, holds = theory.check_dpi(theory.random_chain(rng, size))
        violations += not holds
        worst = max(worst, i_xz - min(i_xy, i_yz))
    return {"check": "dpi", "trials": trials, "violations": violations,
            "max_excess": float(worst), "passed": violations == 0}


def blobs(rng: np.random.Generator, n_per_class: int = 20, classes: int = 3, dim: int = 4, spread: float = 1.0):
    centers = rng.standard_normal((classes, dim)) * 2.0
    y = np.repeat(np.arange(classes), n_per_class)
    return centers[y] + spread * rng.standard_normal((len(y), dim)), y


def check_mean_lr(trials: int = 50, seed: int = 0, steps: int = 100) -> dict:
    rng = np.random.default_rng(seed)
    failures, gains = 0, []
    for _ in range(trials):
        x, y = blobs(rng)
        start, final, holds = theory.check_mean_vs_lr(x, y, steps=steps)
        failures += not holds
        gains.append(start - final)
    return {"check": "mean-lr", "trials": trials, "failures": failures,
            "min_improvement": float(np.min(gains)), "passed": failures == 0}


CHECKS = {
    "tau": check_tau,
    "decomposition": check_decomposition,
    "kl": check_kl,
    "sampler": check_sampler,
    "dpi": check_dpi,
    "mean-lr": check_mean_lr,
}
TRIAL_CHECKS = {"decomposition", "dpi", "mean-lr"}


def run(name: str, trials: int | None = None, seed: int = 0) -> list[dict]:
    names = list(CHECKS) if name == "all" else [name]
    out = []
    for n in names:
        if n not in CHECKS:
            raise KeyError(f"unknown check {n!r}; expected one of {', '.join(CHECKS)} or all")
        kw = {}
        if n != "tau":
            kw["seed"] = seed
        if trials is not None and n in TRIAL_CHECKS:
            kw["trials"] = trials
        out.append(CHECKS[n](**kw))
    return out
