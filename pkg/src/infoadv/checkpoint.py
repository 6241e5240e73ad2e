"""Versioned JSON parameter checkpoints.

Layout (format ``infoadv-checkpoint``, version 1)::

    {
      "format": "infoadv-checkpoint",
      "version": 1,
      "kind": "encoder" | "generator",
      "meta": {...constructor arguments...},
      "params": {"<name>": {"shape": [rows, cols], "values": [row-major floats]}}
    }

Floats are written with ``repr`` precision so a load reproduces the exact
float64 values.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .autodiff import ParamStore
from .encoder import ProjectionHead, TargetEncoder
from .generator import ViewGenerator

FORMAT = "infoadv-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def save_params(path, kind: str, meta: dict, *stores: ParamStore) -> None:
    params = {}
    for store in stores:
        for name, t in store.items():
            params[name] = {"shape": list(t.shape), "values": t.value.ravel().tolist()}
    doc = {"format": FORMAT, "version": VERSION, "kind": kind, "meta": meta, "params": params}
    _atomic_write(Path(path), json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_params(path, kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"{path}: checkpoint not found")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from None
    if doc.get("format") != FORMAT:
        raise CheckpointError(f"{path}: not an {FORMAT} file")
    if doc.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    if kind is not None and doc.get("kind") != kind:
        raise CheckpointError(f"{path}: expected a {kind} checkpoint, found {doc.get('kind')!r}")
    arrays = {}
    for name, entry in doc["params"].items():
        shape = tuple(entry["shape"])
        values = np.asarray(entry["values"], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise CheckpointError(f"{path}: parameter {name} has {values.size} values for shape {shape}")
        arrays[name] = values.reshape(shape)
    return doc["meta"], arrays


def _fill(store: ParamStore, arrays: dict[str, np.ndarray], path) -> None:
    for name, t in store.items():
        if name not in arrays:
            raise CheckpointError(f"{path}: missing parameter {name}")
        if arrays[name].shape != t.shape:
            raise CheckpointError(f"{path}: parameter {name} has shape {arrays[name].shape}, expected {t.shape}")
        store.set(name, arrays[name])


def save_encoder(path, enc: TargetEncoder, head: ProjectionHead, extra: dict | None = None) -> None:
    meta = {"in_dim": enc.in_dim, "hidden_dim": enc.hidden_dim, "out_dim": enc.out_dim,
            "activation": enc.activation, **(extra or {})}
    save_params(path, "encoder", meta, enc.params, head.params)


def load_encoder(path) -> tuple[TargetEncoder, ProjectionHead, dict]:
    meta, arrays = load_params(path, "encoder")
    enc = TargetEncoder(meta["in_dim"], meta["hidden_dim"], meta["out_dim"], meta["activation"])
    head = ProjectionHead(enc.out_dim)
    _fill(enc.params, arrays, path)
    _fill(head.params, arrays, path)
    return enc, head, meta


def save_generator(path, gen: ViewGenerator, extra: dict | None = None) -> None:
    meta = {"in_dim": gen.in_dim, "hidden_dim": gen.hidden_dim, "bounds": list(gen.bounds),
            "temperature": gen.temperature, **(extra or {})}
    save_params(path, "generator", meta, gen.params)


def load_generator(path) -> tuple[ViewGenerator, dict]:
    meta, arrays = load_params(path, "generator")
    gen = ViewGenerator(meta["in_dim"], meta["hidden_dim"], tuple(meta["bounds"]), meta["temperature"])
    _fill(gen.params, arrays, path)
    return gen, meta
