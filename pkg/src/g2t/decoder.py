"""Attention LSTM decoder with one attention head per encoder and a sigmoid gate."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .encoders import EncoderOutput
from .layers import init_lstm, lstm_step
from .triples import BOS_ID, EOS_ID

DEFAULT_MAX_LEN = 60


def init_decoder(rng: np.random.Generator, embed_dim: int, hidden: int, vocab_size: int) -> dict[str, np.ndarray]:
    params = init_lstm(rng, embed_dim, hidden, "dec")
    params["dec.init_h"] = ad.xavier_uniform(rng, (hidden, hidden))
    params["dec.init_c"] = ad.xavier_uniform(rng, (hidden, hidden))
    for stream in ("attn1", "attn2"):
        params[f"{stream}.v"] = ad.xavier_uniform(rng, (hidden,))
        params[f"{stream}.W_x"] = ad.xavier_uniform(rng, (hidden, hidden))
        params[f"{stream}.W_s"] = ad.xavier_uniform(rng, (hidden, hidden))
    params["gate.W"] = ad.xavier_uniform(rng, (hidden + embed_dim, 1))
    params["gate.b"] = np.zeros(1)
    params["out.W_c"] = ad.xavier_uniform(rng, (2 * hidden, hidden))
    params["out.b_c"] = np.zeros(hidden)
    params["out.W_v"] = ad.xavier_uniform(rng, (hidden, vocab_size))
    params["out.b_v"] = np.zeros(vocab_size)
    return params


@dataclass
class DecoderState:
    h: Tensor
    c: Tensor
    context: Tensor | None = None
    p_gcn: float = 0.5


@dataclass
class Memory:
    """Encoder states with their attention keys precomputed."""

    R1: Tensor
    R2: Tensor
    K1: Tensor
    K2: Tensor


@dataclass
class DecodeResult:
    tokens: list[int] = field(default_factory=list)
    log_probs: list[float] = field(default_factory=list)
    gates: list[float] = field(default_factory=list)


def prepare_memory(enc: EncoderOutput, params: dict[str, Tensor]) -> Memory:
    return Memory(enc.R1, enc.R2,
                  ad.matmul(enc.R1, params["attn1.W_x"]),
                  ad.matmul(enc.R2, params["attn2.W_x"]))


def initial_state(enc: EncoderOutput, params: dict[str, Tensor]) -> DecoderState:
    return DecoderState(ad.tanh(ad.matmul(enc.z, params["dec.init_h"])),
                        ad.tanh(ad.matmul(enc.z, params["dec.init_c"])))


def attention_weights(states: Tensor, s_t: Tensor, v: Tensor, W_x: Tensor, W_s: Tensor,
                      keys: Tensor | None = None) -> Tensor:
    """softmax_i(v . tanh(W_x x_i + W_s s_t)) over the rows of ``states``."""
    if states.data.ndim != 2 or states.shape[0] == 0:
        raise ShapeError(f"attention over an empty or non-matrix memory {states.shape}")
    if keys is None:
        keys = ad.matmul(states, W_x)
    scores = ad.matmul(ad.tanh(ad.add(keys, ad.matmul(s_t, W_s))), v)
    return ad.softmax(scores, axis=0)


def decode_step(e_t: Tensor, prev: DecoderState, memory: Memory, params: dict[str, Tensor],
                x_proj: Tensor | None = None) -> tuple[DecoderState, Tensor]:
    if x_proj is None:
        x_proj = ad.add(ad.matmul(e_t, params["dec.W_x"]), params["dec.b"])
    s_t, c_t = lstm_step(x_proj, prev.h, prev.c, params["dec.W_h"])
    alpha = attention_weights(memory.R1, s_t, params["attn1.v"], params["attn1.W_x"],
                              params["attn1.W_s"], memory.K1)
    beta = attention_weights(memory.R2, s_t, params["attn2.v"], params["attn2.W_x"],
                             params["attn2.W_s"], memory.K2)
    c_u = ad.matmul(alpha, memory.R1)
    c_v = ad.matmul(beta, memory.R2)
    p = ad.sigmoid(ad.add(ad.matmul(ad.concat([s_t, e_t]), params["gate.W"]), params["gate.b"]))
    ctx = ad.add(ad.mul(ad.sub(ad.constant(1.0), p), c_u), ad.mul(p, c_v))
    s_tilde = ad.tanh(ad.add(ad.matmul(ad.concat([ctx, s_t]), params["out.W_c"]), params["out.b_c"]))
    dist = ad.softmax(ad.add(ad.matmul(s_tilde, params["out.W_v"]), params["out.b_v"]))
    return DecoderState(s_t, c_t, ctx, float(p.data[0])), dist


def teacher_forced(enc: EncoderOutput, params: dict[str, Tensor], targets: Sequence[int],
                   memory: Memory | None = None) -> list[Tensor]:
    """Step distributions when the decoder is fed BOS followed by ``targets[:-1]``."""
    memory = prepare_memory(enc, params) if memory is None else memory
    inputs = [BOS_ID] + list(targets[:-1])
    E = ad.embedding_lookup(params["embed"], inputs)
    XP = ad.add(ad.matmul(E, params["dec.W_x"]), params["dec.b"])
    state = initial_state(enc, params)
    dists = []
    for t in range(len(inputs)):
        state, dist = decode_step(ad.slice_(E, t), state, memory, params, ad.slice_(XP, t))
        dists.append(dist)
    return dists


def sequence_log_probs(dists: Sequence[Tensor], targets: Sequence[int]) -> Tensor:
    """Log-probabilities of ``targets`` under the per-step distributions, shape (T,)."""
    if len(dists) != len(targets):
        raise ShapeError(f"{len(dists)} distributions vs {len(targets)} targets")
    V = dists[0].shape[0]
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size and (targets.min() < 0 or targets.max() >= V):
        raise ValueError(f"target index out of vocabulary of size {V}")
    flat = ad.concat(list(dists)) if len(dists) > 1 else dists[0]
    picked = ad.slice_(flat, np.arange(len(targets)) * V + targets)
    return ad.log(picked)


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    idx = min(idx, len(probs) - 1)
    while probs[idx] <= 0.0 and idx > 0:
        idx -= 1
    return idx


def _decode(enc: EncoderOutput, params: dict[str, Tensor], max_len: int,
            rng: np.random.Generator | None) -> DecodeResult:
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    result = DecodeResult()
    with ad.no_grad():
        memory = prepare_memory(enc, params)
        state = initial_state(enc, params)
        token = BOS_ID
        for _ in range(max_len):
            e_t = ad.embedding_lookup(params["embed"], token)
            state, dist = decode_step(e_t, state, memory, params)
            probs = dist.data
            token = int(np.argmax(probs)) if rng is None else sample_index(probs, rng)
            result.tokens.append(token)
            with np.errstate(divide="ignore"):
                result.log_probs.append(float(np.log(probs[token])))
            result.gates.append(state.p_gcn)
            if token == EOS_ID:
                break
    return result


def greedy_decode(enc: EncoderOutput, params: dict[str, Tensor], max_len: int = DEFAULT_MAX_LEN) -> DecodeResult:
    """Argmax decoding from BOS; ties go to the lowest token index."""
    return _decode(enc, params, max_len, None)


def sample_decode(enc: EncoderOutput, params: dict[str, Tensor], max_len: int,
                  rng: np.random.Generator) -> DecodeResult:
    return _decode(enc, params, max_len, rng)


def strip_eos(tokens: Sequence[int]) -> list[int]:
    tokens = list(tokens)
    return tokens[:-1] if tokens and tokens[-1] == EOS_ID else tokens
