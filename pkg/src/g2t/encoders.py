"""Meta-path BiLSTM encoder, bidirectional GCN encoder and their combination."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .graphs import LeviGraph, NormalizedAdjacency
from .layers import init_lstm, lstm_step, project_inputs

log = logging.getLogger(__name__)


@dataclass
class EncoderOutput:
    R1: Tensor
    R2: Tensor
    z1: Tensor
    z2: Tensor
    z: Tensor


def init_gmp(rng: np.random.Generator, embed_dim: int, hidden: int) -> dict[str, np.ndarray]:
    if hidden % 2:
        raise ValueError(f"hidden size must be even for the bidirectional encoder, got {hidden}")
    params = init_lstm(rng, embed_dim, hidden // 2, "gmp.fwd")
    params.update(init_lstm(rng, embed_dim, hidden // 2, "gmp.bwd"))
    return params


def init_gcn(rng: np.random.Generator, embed_dim: int, hidden: int, layers: int) -> dict[str, np.ndarray]:
    if layers < 1:
        raise ValueError("the GCN encoder needs at least one layer")
    params = {}
    n_in = embed_dim
    for l in range(layers):
        params[f"gcn.{l}.W_in"] = ad.xavier_uniform(rng, (n_in, hidden))
        params[f"gcn.{l}.W_out"] = ad.xavier_uniform(rng, (n_in, hidden))
        params[f"gcn.{l}.W_f"] = ad.xavier_uniform(rng, (2 * hidden, hidden))
        n_in = hidden
    return params


def gcn_layers(params: dict[str, Tensor]) -> int:
    return sum(1 for k in params if k.startswith("gcn.") and k.endswith(".W_f"))


def _run_lstm(x_proj: Tensor, W_h: Tensor, reverse: bool) -> list[Tensor]:
    n = x_proj.shape[0]
    hidden = W_h.shape[0]
    h = ad.constant(np.zeros((1, hidden)))
    c = ad.constant(np.zeros((1, hidden)))
    out: list[Tensor] = [None] * n  # type: ignore[list-item]
    steps = range(n - 1, -1, -1) if reverse else range(n)
    for t in steps:
        h, c = lstm_step(ad.slice_(x_proj, slice(t, t + 1)), h, c, W_h)
        out[t] = h
    return out


def encode_gmp(path_ids: Sequence[Sequence[int]], params: dict[str, Tensor]) -> tuple[Tensor, Tensor]:
    """Encode each meta-path independently with a BiLSTM and stack the states.

    Both directions restart from a zero state at every path boundary, so the
    rows of one path never see tokens from another.
    """
    if not path_ids or any(len(p) == 0 for p in path_ids):
        raise ValueError("meta-path sequence is empty")
    blocks = []
    for ids in path_ids:
        x = ad.embedding_lookup(params["embed"], ids)
        fwd = _run_lstm(project_inputs(x, params, "gmp.fwd"), params["gmp.fwd.W_h"], reverse=False)
        bwd = _run_lstm(project_inputs(x, params, "gmp.bwd"), params["gmp.bwd.W_h"], reverse=True)
        blocks.append(ad.concat([ad.concat(fwd, axis=0), ad.concat(bwd, axis=0)], axis=1))
    R1 = blocks[0] if len(blocks) == 1 else ad.concat(blocks, axis=0)
    return R1, ad.row_maxpool(R1)


def encode_gcn(node_ids: Sequence[int], adj: NormalizedAdjacency, params: dict[str, Tensor],
               layers: int | None = None) -> tuple[Tensor, Tensor]:
    """Stacked GCN over incoming and outgoing normalized adjacency, fused by a ReLU layer."""
    layers = gcn_layers(params) if layers is None else layers
    if layers < 1:
        raise ValueError("the GCN encoder needs at least one layer")
    n = len(node_ids)
    if adj.in_norm.shape != (n, n) or adj.out_norm.shape != (n, n):
        raise ShapeError(f"encode_gcn: adjacency {adj.in_norm.shape} does not match {n} nodes")
    A_in, A_out = ad.constant(adj.in_norm), ad.constant(adj.out_norm)
    H = ad.embedding_lookup(params["embed"], node_ids)
    for l in range(layers):
        h_in = ad.matmul(A_in, ad.matmul(H, params[f"gcn.{l}.W_in"]))
        h_out = ad.matmul(A_out, ad.matmul(H, params[f"gcn.{l}.W_out"]))
        H = ad.relu(ad.matmul(ad.concat([h_in, h_out], axis=1), params[f"gcn.{l}.W_f"]))
    return H, ad.row_maxpool(H)


def combine_graph_embeddings(z1: Tensor, z2: Tensor) -> Tensor:
    if z1.shape != z2.shape:
        raise ShapeError(f"combine: shapes {z1.shape} and {z2.shape} differ")
    return ad.add(z1, z2)


def encode(path_ids: Sequence[Sequence[int]], node_ids: Sequence[int], adj: NormalizedAdjacency,
           params: dict[str, Tensor]) -> EncoderOutput:
    R1, z1 = encode_gmp(path_ids, params)
    R2, z2 = encode_gcn(node_ids, adj, params)
    return EncoderOutput(R1, R2, z1, z2, combine_graph_embeddings(z1, z2))


def load_word_vectors(path: str | Path, itos: Sequence[str], table: np.ndarray) -> int:
    """Overwrite rows of ``table`` from a text word-vector file; returns rows filled."""
    index = {t: i for i, t in enumerate(itos)}
    filled = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip().split(" ")
            if len(parts) != table.shape[1] + 1:
                continue
            i = index.get(parts[0])
            if i is None:
                continue
            table[i] = np.array(parts[1:], dtype=np.float64)
            filled += 1
    log.info("loaded %d/%d word vectors from %s", filled, len(itos), path)
    return filled
