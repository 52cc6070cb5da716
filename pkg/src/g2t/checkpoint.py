"""Plain-text checkpoint format.

    G2T-CKPT v1
    meta <key> <json value>                       (config, dims, vocab, ...)
    param <name> <d0,d1,...> <base64 float64 LE>  (shape "" for a scalar)
    adam <json: lr, beta1, beta2, eps, step>
    adam_m <name> <shape> <base64>
    adam_v <name> <shape> <base64>
    end

Arrays are little-endian IEEE-754 doubles in row-major order.
"""
from __future__ import annotations

import base64
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import AdamState, parameter
from .model import Dims, ModelParams

HEADER = "G2T-CKPT v1"


class CheckpointError(ValueError):
    pass


def _encode(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def _decode(shape: str, payload: str) -> np.ndarray:
    dims = tuple(int(d) for d in shape.split(",")) if shape else ()
    return np.frombuffer(base64.b64decode(payload), dtype="<f8").astype(np.float64).reshape(dims)


def _shape(a: np.ndarray) -> str:
    return ",".join(str(d) for d in a.shape)


@dataclass
class Checkpoint:
    params: ModelParams
    vocab: list[str]
    config: dict = field(default_factory=dict)
    adam: AdamState | None = None
    meta: dict = field(default_factory=dict)

    def dumps(self) -> str:
        lines = [HEADER]
        d = self.params.dims
        lines.append("meta dims " + json.dumps([d.vocab_size, d.embed_dim, d.hidden, d.gcn_layers]))
        lines.append("meta config " + json.dumps(self.config, sort_keys=True))
        lines.append("meta vocab " + json.dumps(self.vocab, ensure_ascii=False))
        for k, v in sorted(self.meta.items()):
            lines.append(f"meta {k} " + json.dumps(v, sort_keys=True))
        for name, t in self.params.items():
            lines.append(f"param {name} {_shape(t.data)} {_encode(t.data)}")
        if self.adam is not None:
            a = self.adam
            lines.append("adam " + json.dumps({"lr": a.lr, "beta1": a.beta1, "beta2": a.beta2,
                                               "eps": a.eps, "step": a.step}))
            for name in sorted(a.m):
                lines.append(f"adam_m {name} {_shape(a.m[name])} {_encode(a.m[name])}")
                lines.append(f"adam_v {name} {_shape(a.v[name])} {_encode(a.v[name])}")
        lines.append("end")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        atomic_write_text(path, self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Checkpoint":
        lines = text.splitlines()
        if not lines or lines[0] != HEADER:
            raise CheckpointError("not a G2T-CKPT v1 file")
        meta: dict = {}
        tensors = {}
        adam = None
        frozen = set()
        for lineno, line in enumerate(lines[1:], 2):
            kind, _, rest = line.partition(" ")
            try:
                if kind == "meta":
                    key, _, value = rest.partition(" ")
                    meta[key] = json.loads(value)
                elif kind == "param":
                    name, shape, payload = _split3(rest)
                    tensors[name] = _decode(shape, payload)
                elif kind == "adam":
                    h = json.loads(rest)
                    adam = AdamState(h["lr"], h["beta1"], h["beta2"], h["eps"], h["step"])
                elif kind in ("adam_m", "adam_v"):
                    name, shape, payload = _split3(rest)
                    if adam is None:
                        raise CheckpointError("moment record before adam header")
                    (adam.m if kind == "adam_m" else adam.v)[name] = _decode(shape, payload)
                elif kind == "end":
                    break
                else:
                    raise CheckpointError(f"unknown record {kind!r}")
            except (ValueError, KeyError) as exc:
                raise CheckpointError(f"line {lineno}: {exc}") from None
        else:
            raise CheckpointError("truncated checkpoint (missing 'end')")
        try:
            dims = Dims(*meta.pop("dims"))
            vocab = meta.pop("vocab")
            config = meta.pop("config")
        except KeyError as exc:
            raise CheckpointError(f"missing meta record {exc}") from None
        if config.get("freeze_embeddings"):
            frozen.add("embed")
        params = ModelParams({k: parameter(v, k) for k, v in tensors.items()}, dims)
        for name in frozen:
            params[name].requires_grad = False
        return cls(params, vocab, config, adam, meta)

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def _split3(rest: str) -> tuple[str, str, str]:
    parts = rest.split(" ")
    if len(parts) == 2:  # scalar: empty shape field collapses
        return parts[0], "", parts[1]
    if len(parts) == 3:
        return parts[0], parts[1], parts[2]
    raise CheckpointError(f"malformed array record: {rest[:60]!r}")


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory so failures leave nothing behind."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
