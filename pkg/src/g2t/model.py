"""Parameter container and per-example forward passes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .decoder import DecodeResult, greedy_decode, init_decoder, sample_decode
from .encoders import EncoderOutput, encode, init_gcn, init_gmp
from .graphs import (NormalizedAdjacency, build_entity_graph, build_levi_graph, compute_meta_paths,
                     normalize_adjacency)
from .triples import EOS_ID, MaskedExample, Triple, Vocab


@dataclass(frozen=True)
class Dims:
    vocab_size: int
    embed_dim: int = 300
    hidden: int = 512
    gcn_layers: int = 2


class ModelParams(Mapping[str, Tensor]):
    """Named trainable tensors; iteration order is the sorted parameter names."""

    def __init__(self, tensors: Mapping[str, Tensor], dims: Dims):
        self._tensors = dict(sorted(tensors.items()))
        self.dims = dims

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def trainable(self) -> dict[str, Tensor]:
        return {k: t for k, t in self._tensors.items() if t.requires_grad}

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {k: t.grad for k, t in self._tensors.items() if t.requires_grad and t.grad is not None}

    def copy(self) -> "ModelParams":
        return ModelParams({k: Tensor(t.data.copy(), t.requires_grad, k) for k, t in self._tensors.items()},
                           self.dims)

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self._tensors.items()}

    def size(self) -> int:
        return sum(t.data.size for t in self._tensors.values())


def init_params(dims: Dims, rng: np.random.Generator, freeze_embeddings: bool = False) -> ModelParams:
    arrays = {"embed": ad.xavier_uniform(rng, (dims.vocab_size, dims.embed_dim))}
    arrays.update(init_gmp(rng, dims.embed_dim, dims.hidden))
    arrays.update(init_gcn(rng, dims.embed_dim, dims.hidden, dims.gcn_layers))
    arrays.update(init_decoder(rng, dims.embed_dim, dims.hidden, dims.vocab_size))
    tensors = {k: ad.parameter(v, k) for k, v in arrays.items()}
    if freeze_embeddings:
        tensors["embed"].requires_grad = False
    return ModelParams(tensors, dims)


@dataclass(frozen=True)
class GraphInputs:
    """Everything the encoders need for one triple set, as vocabulary ids."""

    path_ids: tuple[tuple[int, ...], ...]
    node_ids: tuple[int, ...]
    adj: NormalizedAdjacency


def graph_inputs(triples: tuple[Triple, ...], vocab: Vocab) -> GraphInputs:
    seq = compute_meta_paths(build_entity_graph(triples))
    levi = build_levi_graph(triples)
    return GraphInputs(tuple(tuple(vocab.encode(p)) for p in seq.paths),
                       tuple(vocab.encode(levi.nodes)),
                       normalize_adjacency(levi))


@dataclass(frozen=True)
class Instance:
    """One (triple set, reference) training pair, pre-encoded."""

    inputs: GraphInputs
    target: tuple[int, ...]
    gold: tuple[Triple, ...]


def make_instances(data: list[MaskedExample], vocab: Vocab, all_references: bool = True) -> list[Instance]:
    out = []
    for mex in data:
        inputs = graph_inputs(mex.triples, vocab)
        refs = mex.references if all_references else mex.references[:1]
        for ref in refs:
            out.append(Instance(inputs, tuple(vocab.encode(ref)) + (EOS_ID,), mex.triples))
    return out


def encode_inputs(inputs: GraphInputs, params: Mapping[str, Tensor]) -> EncoderOutput:
    return encode(inputs.path_ids, inputs.node_ids, inputs.adj, params)


def generate(inputs: GraphInputs, params: Mapping[str, Tensor], max_len: int,
             rng: np.random.Generator | None = None) -> DecodeResult:
    with ad.no_grad():
        enc = encode_inputs(inputs, params)
    if rng is None:
        return greedy_decode(enc, params, max_len)
    return sample_decode(enc, params, max_len, rng)
