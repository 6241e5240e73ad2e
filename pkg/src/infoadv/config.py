"""Training configuration, per-dataset defaults, and the flat ``key=value`` config format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1e-5
    p_f1: float = 0.4
    p_f2: float = 0.3
    p_ea: float = 0.8
    p_e2: float = 0.2
    lr_encoder: float = 5e-4
    lr_generator: float = 5e-4
    weight_decay: float = 1e-5
    epochs: int = 1000
    hidden_dim: int = 128
    activation: str = "relu"
    tau_nce: float = 0.5
    t_g: float = 0.5
    freq_ratio: int = 1
    generator_objective: str = "kl"
    seed: int = 0
    gen_hidden_dim: int = 64
    use_generator: bool = True
    hard_mask: bool = True

    def __post_init__(self):
        validate(self)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


def validate(cfg: TrainConfig) -> None:
    for name in ("p_f1", "p_f2", "p_ea", "p_e2"):
        v = getattr(cfg, name)
        if not 0.0 <= v < 1.0:
            raise ConfigError(f"{name} must lie in [0, 1), got {v}")
    if cfg.epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {cfg.epochs}")
    if cfg.freq_ratio < 1:
        raise ConfigError(f"freq_ratio must be an integer >= 1, got {cfg.freq_ratio}")
    if cfg.lam < 0:
        raise ConfigError(f"lam must be non-negative, got {cfg.lam}")
    for name in ("lr_encoder", "lr_generator", "tau_nce", "t_g"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"{name} must be positive, got {getattr(cfg, name)}")
    if cfg.weight_decay < 0:
        raise ConfigError(f"weight_decay must be non-negative, got {cfg.weight_decay}")
    if cfg.hidden_dim < 1 or cfg.gen_hidden_dim < 1:
        raise ConfigError("hidden dimensions must be positive")
    if cfg.activation not in ("relu", "prelu", "rrelu"):
        raise ConfigError(f"unknown activation {cfg.activation!r}")
    if cfg.generator_objective not in ("kl", "infonce"):
        raise ConfigError(f"generator_objective must be 'kl' or 'infonce', got {cfg.generator_objective!r}")


# lam, (p_f1, p_f2), (p_ea, p_e2), lr, weight decay, epochs, hidden dim, activation
_TABLE = {
    "cora": (1e-5, (0.4, 0.3), (0.8, 0.2), 5e-4, 1e-5, 1000, 128, "relu"),
    "citeseer": (1e-5, (0.3, 0.2), (0.2, 0.0), 1e-3, 1e-5, 500, 256, "prelu"),
    "pubmed": (10.0, (0.1, 0.1), (0.3, 0.5), 1e-3, 1e-5, 2500, 256, "relu"),
    "coauthor-cs": (1e-5, (0.3, 0.4), (0.3, 0.2), 5e-4, 1e-5, 1000, 256, "rrelu"),
    "coauthor-phy": (10.0, (0.1, 0.4), (0.4, 0.1), 1e-2, 1e-5, 1900, 128, "rrelu"),
    "wiki-cs": (10.0, (0.1, 0.1), (0.2, 0.3), 1e-2, 1e-5, 3100, 256, "prelu"),
    "amazon-photo": (60.0, (0.1, 0.1), (0.9, 0.3), 1e-2, 1e-5, 2700, 256, "relu"),
    "amazon-computers": (0.5, (0.2, 0.3), (0.9, 0.3), 1e-2, 1e-5, 2000, 128, "rrelu"),
}
DATASETS = tuple(_TABLE)


def default_config(dataset_name: str, **overrides) -> TrainConfig:
    key = dataset_name.lower().replace("_", "-")
    if key not in _TABLE:
        raise ConfigError(f"unknown dataset {dataset_name!r}; known: {', '.join(DATASETS)}")
    lam, (pf1, pf2), (pea, pe2), lr, wd, epochs, hidden, act = _TABLE[key]
    cfg = TrainConfig(lam=lam, p_f1=pf1, p_f2=pf2, p_ea=pea, p_e2=pe2, lr_encoder=lr,
                      lr_generator=lr, weight_decay=wd, epochs=epochs, hidden_dim=hidden,
                      activation=act)
    return cfg.replace(**overrides) if overrides else cfg


def _parse_value(name: str, typ, raw: str):
    raw = raw.strip()
    try:
        if typ in (bool, "bool"):
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config(text: str, base: TrainConfig | None = None) -> TrainConfig:
    types = {f.name: f.type for f in fields(TrainConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, types[key], raw)
    base = base or TrainConfig()
    try:
        return base.replace(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, base: TrainConfig | None = None) -> TrainConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    return parse_config(path.read_text(encoding="utf-8"), base)


def dump_config(cfg: TrainConfig) -> str:
    lines = []
    for f in fields(TrainConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name}={str(v).lower() if isinstance(v, bool) else repr(v) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"


def save_config(cfg: TrainConfig, path) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")


VARIANTS = ("infoadv", "wo_gen", "wo_reg", "grace")


def variant_config(cfg: TrainConfig, variant: str) -> TrainConfig:
    """Ablations: ``wo_gen`` swaps the generator for random dropping at ``p_ea``,
    ``wo_reg`` sets lambda to 0, ``grace`` does both (encoder-only schedule)."""
    if variant == "infoadv":
        return cfg
    if variant == "wo_gen":
        return cfg.replace(use_generator=False, freq_ratio=1)
    if variant == "wo_reg":
        return cfg.replace(lam=0.0)
    if variant == "grace":
        return cfg.replace(use_generator=False, lam=0.0, freq_ratio=1)
    raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
