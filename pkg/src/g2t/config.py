from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 50
    gamma: float = 0.3
    epochs: int = 20
    ce_pretrain_epochs: int | None = None  # None -> 80% of epochs
    hidden: int = 512
    embed_dim: int = 300
    gcn_layers: int = 2
    max_len: int = 60
    seed: int = 1
    masking: bool = True
    min_freq: int = 1
    clip_norm: float = 5.0
    freeze_embeddings: bool = False
    eval_every: int = 1
    all_references: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        for name in ("batch_size", "epochs", "hidden", "embed_dim", "gcn_layers", "max_len", "min_freq",
                     "eval_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.hidden % 2:
            raise ValueError("hidden must be even")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.ce_pretrain_epochs is not None and self.ce_pretrain_epochs < 0:
            raise ValueError("ce_pretrain_epochs must be >= 0")

    @property
    def ce_epochs(self) -> int:
        if self.ce_pretrain_epochs is None:
            return int(round(0.8 * self.epochs))
        return min(self.ce_pretrain_epochs, self.epochs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


def _coerce(field: dataclasses.Field, raw: str):
    kind = str(field.type)
    raw = raw.strip()
    if "None" in kind and raw.lower() in ("none", ""):
        return None
    if kind.startswith("bool"):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{field.name}: not a boolean: {raw!r}")
    if kind.startswith("int"):
        return int(raw)
    if kind.startswith("float"):
        return float(raw)
    return raw


def parse_overrides(pairs: Iterable[str]) -> dict:
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"expected key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        key = key.strip()
        if key not in fields:
            raise ValueError(f"unknown config key {key!r}")
        out[key] = _coerce(fields[key], value)
    return out


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> TrainConfig:
    """Defaults, then the key=value file, then command-line overrides."""
    values = {}
    if path is not None:
        lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
        values.update(parse_overrides(ln for ln in lines if ln))
    values.update(parse_overrides(overrides))
    return TrainConfig(**values)
