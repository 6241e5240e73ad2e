"""``infoadv`` command-line interface.

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 data or
checkpoint error, 4 numeric divergence during training.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import checks, experiments
from .checkpoint import CheckpointError, load_encoder, save_encoder, save_generator
from .config import (DATASETS, VARIANTS, ConfigError, TrainConfig, default_config, dump_config, load_config,
                     parse_config, variant_config)
from .evaluation import EvalReport, link_predict_eval, mean_classifier_eval, probe_split
from .graph import (DataError, dataset_files, inject_noise, load_graph, save_graph, sbm_generate, split_links,
                    sym_normalize)
from .trainer import TrainingDiverged, train

EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4
MANIFEST = "manifest.json"


# ---------------------------------------------------------------------------
# Manifest and output helpers
# ---------------------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _blob_hash(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def content_hash(files: list[Path], extra: dict[str, str] | None = None) -> str:
    """Git-style tree hash: sha1 over ``<blob sha1> <name>`` lines of every input."""
    lines = [f"{_blob_hash(p.read_bytes())} {p.name}" for p in sorted(files)]
    lines += [f"{_blob_hash(v.encode())} {k}" for k, v in sorted((extra or {}).items())]
    return hashlib.sha1("\n".join(lines).encode()).hexdigest()


class RunManifest:
    """Provenance record written to ``<out>/manifest.json`` before any result file."""

    def __init__(self, out: Path, command: list[str], config: TrainConfig | None, seeds, inputs: list[Path],
                 outputs: list[str], extra_inputs: dict[str, str] | None = None):
        self.path = out / MANIFEST
        self.started = time.perf_counter()
        self.doc = {
            "command": command,
            "config": None if config is None else {k: getattr(config, k) for k in config.__dataclass_fields__},
            "seeds": [int(s) for s in seeds],
            "input_hash": content_hash(inputs, extra_inputs),
            "inputs": sorted(str(p) for p in inputs),
            "outputs": sorted(outputs),
            "wall_time": None,
            "status": "running",
        }
        out.mkdir(parents=True, exist_ok=True)
        self._write()

    def _write(self) -> None:
        _atomic_write(self.path, json.dumps(self.doc, indent=2, sort_keys=True) + "\n")

    def finish(self, status: str = "ok") -> None:
        self.doc["wall_time"] = round(time.perf_counter() - self.started, 3)
        self.doc["status"] = status
        self._write()


def _write_json(path: Path, doc: dict) -> None:
    _atomic_write(path, json.dumps({"manifest": MANIFEST, **doc}, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    _atomic_write(path, buf.getvalue())


def parse_seeds(text: str) -> list[int]:
    """``"3"`` means seeds 0, 1, 2; ``"4,7"`` is an explicit list."""
    try:
        if "," in text:
            return [int(s) for s in text.split(",") if s.strip()]
        n = int(text)
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}") from None
    if n < 1:
        raise ConfigError("seed count must be >= 1")
    return list(range(n))


def _floats(text: str, name: str) -> list[float]:
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad {name} list {text!r}") from None
    if not vals:
        raise ConfigError(f"{name} list is empty")
    return vals


def resolve_config(args) -> TrainConfig:
    base = default_config(args.dataset_defaults) if args.dataset_defaults else TrainConfig()
    cfg = load_config(args.config, base) if args.config else base
    if args.set:
        cfg = parse_config("\n".join(args.set), cfg)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    if getattr(args, "variant", None):
        cfg = variant_config(cfg, args.variant)
    return cfg


def _load_data(path) -> tuple:
    g = load_graph(path)
    return g, dataset_files(path)


def _need_labels(g, path):
    if g.labels is None:
        raise DataError(f"{path}: labels.csv is required for this command")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    g, files = _load_data(args.data)
    out = Path(args.out)
    outputs = ["encoder.ckpt.json", "trainlog.csv", "config.txt", "result.json"]
    if cfg.use_generator:
        outputs.append("generator.ckpt.json")
    manifest = RunManifest(out, ["train", *args.argv], cfg, [cfg.seed], files, outputs,
                           {"config": dump_config(cfg)})
    meta = {"seed": cfg.seed, "variant": args.variant or "infoadv", "dataset": Path(args.data).name}
    g_train = g
    if args.link_split is not None:
        split = split_links(g, seed=args.link_split)
        g_train = g.with_edges(split.train_edges)
        meta["link_split_seed"] = int(args.link_split)
    res = train(g_train, cfg)
    save_encoder(out / "encoder.ckpt.json", res.encoder, res.head, meta)
    if res.generator is not None:
        save_generator(out / "generator.ckpt.json", res.generator, meta)
    _atomic_write(out / "trainlog.csv", res.log.to_csv(include_time=args.include_time))
    _atomic_write(out / "config.txt", dump_config(cfg))
    final = {k: v for k, v in res.log.records[-1].items() if k != "seconds"}
    _write_json(out / "result.json", {"final": final, "encoder_steps": res.encoder_steps,
                                      "generator_steps": res.generator_steps})
    manifest.finish()
    print(f"trained {cfg.epochs} epochs; outputs in {out}")
    return 0


def _load_checkpoint(path, g):
    path = Path(path)
    if path.is_dir():
        path = path / "encoder.ckpt.json"
    enc, head, meta = load_encoder(path)
    if enc.in_dim != g.feat_dim:
        raise CheckpointError(f"{path}: encoder expects {enc.in_dim} features but the graph has {g.feat_dim}")
    return enc, meta, path


def cmd_eval_node(args) -> int:
    g, files = _load_data(args.data)
    _need_labels(g, args.data)
    enc, meta, ckpt = _load_checkpoint(args.checkpoint, g)
    seeds = parse_seeds(args.seeds)
    out = Path(args.out)
    manifest = RunManifest(out, ["eval-node", *args.argv], None, seeds, files + [ckpt],
                           ["eval_node.json", "eval_node.csv"])
    emb = enc.embed(sym_normalize(g), g.features)
    report = experiments.node_eval(emb, g.labels, seeds)
    if args.mean_cls_rule:
        for s in seeds:
            train_idx, _ = probe_split(g.labels, 0.10, s)
            report.values.setdefault("mean_classifier_f1", []).append(
                mean_classifier_eval(emb, g.labels, train_idx, args.mean_cls_rule))
        report.extra["mean_cls_rule"] = args.mean_cls_rule
    _finish_report(out, "eval_node", report, meta, args.data)
    manifest.finish()
    print(json.dumps({k: [report.mean(k), report.std(k)] for k in sorted(report.values)}))
    return 0


def cmd_eval_link(args) -> int:
    g, files = _load_data(args.data)
    out = Path(args.out)
    if args.checkpoint:
        enc, meta, ckpt = _load_checkpoint(args.checkpoint, g)
        if "link_split_seed" not in meta:
            raise ConfigError(f"{ckpt}: checkpoint was trained on the full graph; "
                              "train with --link-split SEED to hold out test edges")
        seeds = [int(meta["link_split_seed"])]
        manifest = RunManifest(out, ["eval-link", *args.argv], None, seeds, files + [ckpt],
                               ["eval_link.json", "eval_link.csv"])
        split = split_links(g, seed=seeds[0])
        g_train = g.with_edges(split.train_edges)
        auc, ap = link_predict_eval(enc.embed(sym_normalize(g_train), g_train.features), split)
        report = EvalReport("link")
        report.add(seeds[0], auc=auc, ap=ap)
    else:
        cfg = resolve_config(args)
        seeds = parse_seeds(args.seeds)
        meta = {"variant": args.variant or "infoadv"}
        manifest = RunManifest(out, ["eval-link", *args.argv], cfg, seeds, files, ["eval_link.json", "eval_link.csv"],
                               {"config": dump_config(cfg)})
        report = experiments.link_eval(g, cfg, seeds)
    _finish_report(out, "eval_link", report, meta, args.data)
    manifest.finish()
    print(json.dumps({k: [report.mean(k), report.std(k)] for k in sorted(report.values)}))
    return 0


def _finish_report(out: Path, stem: str, report: EvalReport, meta: dict, data) -> None:
    _write_json(out / f"{stem}.json", report.to_dict())
    rows = report.csv_rows(Path(data).name, meta.get("variant", "infoadv"))
    _write_csv(out / f"{stem}.csv", rows[0], rows[1:])


def _sweep_setup(args, name, outputs):
    cfg = resolve_config(args)
    g, files = _load_data(args.data)
    _need_labels(g, args.data)
    seeds = parse_seeds(args.seeds)
    out = Path(args.out)
    manifest = RunManifest(out, [name, *args.argv], cfg, seeds, files, outputs, {"config": dump_config(cfg)})
    return cfg, g, seeds, out, manifest


def _grouped(rows, key_len):
    groups: dict = {}
    for r in rows:
        groups.setdefault(tuple(r[:key_len]), []).append(r[-1])
    return [(*k, float(np.mean(v)), float(np.std(v)), len(v)) for k, v in sorted(groups.items())]


def cmd_noise_sweep(args) -> int:
    levels = _floats(args.levels, "levels")
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(f"unknown variant {v!r}; expected one of {VARIANTS}")
    cfg, g, seeds, out, manifest = _sweep_setup(args, "noise-sweep", ["noise_sweep.csv", "noise_summary.json"])
    rows = experiments.noise_sweep(g, cfg, levels, variants, seeds)
    _write_csv(out / "noise_sweep.csv", ["level", "variant", "seed", "f1"], rows)
    summary = [dict(zip(("level", "variant", "mean", "std", "n"), r)) for r in _grouped([(r[0], r[1], r[3]) for r in rows], 2)]
    _write_json(out / "noise_summary.json", {"summary": summary})
    manifest.finish()
    for s in summary:
        print(f"level={s['level']:g} variant={s['variant']} f1={s['mean']:.4f}±{s['std']:.4f}")
    return 0


def cmd_hparam_sweep(args) -> int:
    lams = _floats(args.lams, "lams")
    peas = _floats(args.p_eas, "p-eas")
    cfg, g, seeds, out, manifest = _sweep_setup(args, "hparam-sweep", ["hparam_sweep.csv"])
    rows = experiments.hparam_sweep(g, cfg, lams, peas, seeds)
    _write_csv(out / "hparam_sweep.csv", ["lam", "p_ea", "seed", "f1"], rows)
    manifest.finish()
    print(f"{len(rows)} grid cells written to {out / 'hparam_sweep.csv'}")
    return 0


def cmd_freq_sweep(args) -> int:
    try:
        ratios = [int(r) for r in args.ratios.split(",") if r.strip()]
    except ValueError:
        raise ConfigError(f"bad ratio list {args.ratios!r}") from None
    if not ratios or min(ratios) < 1:
        raise ConfigError("ratios must be integers >= 1")
    cfg, g, seeds, out, manifest = _sweep_setup(args, "freq-sweep", ["freq_sweep.csv", "freq_trace.csv"])
    summary, trace = experiments.freq_sweep(g, cfg, ratios, seeds)
    _write_csv(out / "freq_sweep.csv", ["ratio", "seed", "f1"], summary)
    _write_csv(out / "freq_trace.csv", ["ratio", "seed", "epoch", "edge_preserve_rate"], trace)
    manifest.finish()
    for r, s, f1 in summary:
        print(f"ratio={r} seed={s} f1={f1:.4f}")
    return 0


def cmd_theory_check(args) -> int:
    try:
        results = checks.run(args.check, args.trials, args.seed)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    doc = {"checks": results, "passed": all(r["passed"] for r in results)}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        _atomic_write(Path(args.out), text)
    sys.stdout.write(text)
    return 0 if doc["passed"] else EXIT_CHECK_FAILED


def cmd_grad_check(args) -> int:
    err = experiments.model_grad_check(nodes=args.nodes, seed=args.seed, eps=args.eps)
    doc = {"check": "grad", "nodes": args.nodes, "eps": args.eps, "max_rel_err": float(err),
           "tolerance": args.tolerance, "passed": bool(err < args.tolerance)}
    print(json.dumps(doc, sort_keys=True))
    return 0 if doc["passed"] else EXIT_CHECK_FAILED


def cmd_gen_data(args) -> int:
    try:
        blocks = [int(b) for b in args.blocks.split(",") if b.strip()]
    except ValueError:
        raise ConfigError(f"bad block list {args.blocks!r}") from None
    try:
        g = sbm_generate(blocks, args.p_in, args.p_out, args.feat_dim, args.feat_noise, args.seed)
        if args.noise:
            g = inject_noise(g, args.noise, [args.seed, 1])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise DataError(f"{out}: directory is not empty (use --force to overwrite)")
    save_graph(g, out)
    print(f"wrote {g.num_nodes} nodes, {g.num_edges} edges to {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _config_flags(p, seed=True):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--dataset-defaults", choices=DATASETS, help="start from a dataset's default hyperparameters")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field (repeatable)")
    p.add_argument("--variant", choices=VARIANTS, help="ablation variant (default infoadv)")
    if seed:
        p.add_argument("--seed", type=int, help="training seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infoadv", description="Adversarial graph contrastive learning toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an encoder and write checkpoints and the training log")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _config_flags(p)
    p.add_argument("--link-split", type=int, help="train on the training edges of this link split only")
    p.add_argument("--include-time", action="store_true", help="fill the seconds column (breaks byte reproducibility)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-node", help="linear-probe node classification of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", default="3", help="count N (seeds 0..N-1) or comma list")
    p.add_argument("--out", required=True)
    p.add_argument("--mean-cls-rule", choices=("inner", "euclidean"), help="also report Mean Classifier F1")
    p.set_defaults(func=cmd_eval_node)

    p = sub.add_parser("eval-link", help="link prediction AUC/AP over link splits")
    p.add_argument("--checkpoint", help="encoder trained with --link-split (evaluates that split)")
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", default="3", help="split seeds when training here: count N or comma list")
    p.add_argument("--out", required=True)
    _config_flags(p)
    p.set_defaults(func=cmd_eval_link)

    p = sub.add_parser("noise-sweep", help="F1 under injected edge noise")
    p.add_argument("--data", required=True)
    p.add_argument("--levels", required=True, help="comma list of noise probabilities")
    p.add_argument("--variants", default="infoadv,grace")
    p.add_argument("--seeds", default="3")
    p.add_argument("--out", required=True)
    _config_flags(p, seed=False)
    p.set_defaults(func=cmd_noise_sweep)

    p = sub.add_parser("hparam-sweep", help="F1 over a lambda x p_ea grid")
    p.add_argument("--data", required=True)
    p.add_argument("--lams", required=True)
    p.add_argument("--p-eas", required=True)
    p.add_argument("--seeds", default="1")
    p.add_argument("--out", required=True)
    _config_flags(p, seed=False)
    p.set_defaults(func=cmd_hparam_sweep)

    p = sub.add_parser("freq-sweep", help="F1 and edge preserving rate over update-frequency ratios")
    p.add_argument("--data", required=True)
    p.add_argument("--ratios", default="1,5,10,100")
    p.add_argument("--seeds", default="1")
    p.add_argument("--out", required=True)
    _config_flags(p, seed=False)
    p.set_defaults(func=cmd_freq_sweep)

    p = sub.add_parser("theory-check", help="exact-enumeration theory checks (JSON verdicts)")
    p.add_argument("--check", default="all", help=f"one of {', '.join(checks.CHECKS)} or all")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_theory_check)

    p = sub.add_parser("grad-check", help="finite-difference check of the full model")
    p.add_argument("--nodes", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("gen-data", help="write a synthetic block-model dataset directory")
    p.add_argument("--blocks", required=True, help="comma list of block sizes")
    p.add_argument("--p-in", type=float, required=True)
    p.add_argument("--p-out", type=float, required=True)
    p.add_argument("--feat-dim", type=int, default=32)
    p.add_argument("--feat-noise", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0, help="extra random-edge probability")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv[1:]
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheckpointError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
