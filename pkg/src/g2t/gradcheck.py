"""Finite-difference checks for every primitive and for the composed hybrid loss."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .decoder import sequence_log_probs, teacher_forced
from .model import Dims, encode_inputs, graph_inputs, init_params
from .training import cross_entropy_loss, hybrid_loss, scst_loss
from .triples import EOS_ID, Triple, Vocab, build_vocab, Example, MaskedExample

TOLERANCE = 1e-4


@dataclass
class CheckRow:
    name: str
    error: float

    @property
    def ok(self) -> bool:
        return self.error < TOLERANCE


def _shape(rng: np.random.Generator) -> tuple[int, int]:
    return int(rng.integers(1, 9)), int(rng.integers(1, 9))


def _project(rng: np.random.Generator, shape) -> Tensor:
    return ad.constant(rng.normal(size=shape))


def primitive_cases(rng: np.random.Generator) -> list[tuple[str, Callable[[Tensor], Tensor], Tensor]]:
    """(label, scalar function of x, x) triples covering every primitive input."""
    cases = []

    def scalarize(out: Tensor) -> Tensor:
        return ad.sum_(ad.mul(out, ad.constant(proj[out.shape])))

    proj: dict = {}

    def P(shape):
        proj.setdefault(shape, rng.normal(size=shape))
        return shape

    def leaf(shape, lo=None):
        data = rng.normal(size=shape) if lo is None else rng.uniform(lo, lo + 2.0, size=shape)
        return ad.parameter(data)

    m, n = _shape(rng)
    k = int(rng.integers(1, 9))
    b = ad.constant(rng.normal(size=(k, n)))
    x = leaf((m, k))
    P((m, n))
    cases.append(("matmul[a]", lambda x: scalarize(ad.matmul(x, b)), x))
    a = ad.constant(rng.normal(size=(m, k)))
    cases.append(("matmul[b]", lambda x: scalarize(ad.matmul(a, x)), leaf((k, n))))
    v = ad.constant(rng.normal(size=(m,)))
    P((k,))
    cases.append(("matmul[vec]", lambda x: scalarize(ad.matmul(v, x)), leaf((m, k))))

    m, n = _shape(rng)
    P((m, n))
    other = ad.constant(rng.normal(size=(m, n)))
    row = ad.constant(rng.normal(size=(n,)))
    cases.append(("add", lambda x: scalarize(ad.add(x, other)), leaf((m, n))))
    cases.append(("add[broadcast]", lambda x: scalarize(ad.add(other, x)), leaf((n,))))
    cases.append(("sub", lambda x: scalarize(ad.sub(other, x)), leaf((m, n))))
    cases.append(("mul_elementwise", lambda x: scalarize(ad.mul(x, other)), leaf((m, n))))
    cases.append(("mul_elementwise[broadcast]", lambda x: scalarize(ad.mul(other, x)), leaf((n,))))
    cases.append(("mul_elementwise[self]", lambda x: scalarize(ad.mul(x, x)), leaf((m, n))))
    cases.append(("scalar_mul", lambda x: scalarize(ad.scalar_mul(x, -1.7)), leaf((m, n))))
    cases.append(("tanh", lambda x: scalarize(ad.tanh(x)), leaf((m, n))))
    cases.append(("sigmoid", lambda x: scalarize(ad.sigmoid(x)), leaf((m, n))))

    relu_x = rng.normal(size=(m, n))
    relu_x[np.abs(relu_x) < 0.05] = 0.5
    cases.append(("relu", lambda x: scalarize(ad.relu(x)), ad.parameter(relu_x)))
    cases.append(("softmax[axis=-1]", lambda x: scalarize(ad.softmax(x, axis=-1)), leaf((m, n))))
    cases.append(("softmax[axis=0]", lambda x: scalarize(ad.softmax(x, axis=0)), leaf((m, n))))
    cases.append(("log", lambda x: scalarize(ad.log(x)), leaf((m, n), lo=0.5)))
    P((n,))
    cases.append(("row_maxpool", lambda x: scalarize(ad.row_maxpool(x)), leaf((m, n))))
    cases.append(("sum", lambda x: ad.sum_(x), leaf((m, n))))
    P((m,))
    cases.append(("sum[axis=1]", lambda x: scalarize(ad.sum_(x, axis=1)), leaf((m, n))))
    cases.append(("mean", lambda x: ad.mean(x), leaf((m, n))))
    cases.append(("mean[axis=1]", lambda x: scalarize(ad.mean(x, axis=1)), leaf((m, n))))

    m2 = int(rng.integers(1, 9))
    P((m + m2, n))
    y = ad.constant(rng.normal(size=(m2, n)))
    cases.append(("concat[axis=0]", lambda x: scalarize(ad.concat([x, y], axis=0)), leaf((m, n))))
    z = ad.constant(rng.normal(size=(m, m2)))
    P((m, n + m2))
    cases.append(("concat[axis=1]", lambda x: scalarize(ad.concat([x, z], axis=1)), leaf((m, n))))

    ids = rng.integers(0, m, size=5)
    P((5, n))
    cases.append(("embedding_lookup", lambda x: scalarize(ad.embedding_lookup(x, ids)), leaf((m, n))))
    lo = int(rng.integers(0, m))
    P((m - lo, n))
    cases.append(("slice[rows]", lambda x: scalarize(ad.slice_(x, slice(lo, m))), leaf((m, n))))
    pick = rng.integers(0, m * n, size=4)
    P((4,))
    cases.append(("slice[fancy]", lambda x: scalarize(ad.slice_(x, (pick // n, pick % n))), leaf((m, n))))
    return cases


def check_primitives(seed: int = 0, eps: float = 1e-5) -> list[CheckRow]:
    rng = np.random.default_rng(seed)
    return [CheckRow(name, ad.grad_check(f, x, eps)) for name, f, x in primitive_cases(rng)]


MICRO_TRIPLES = (
    Triple("ENTITY_1 FOOD", "region", "ENTITY_2 CITY"),
    Triple("ENTITY_2 CITY", "country", "ENTITY_3 COUNTRY"),
)
MICRO_REFERENCE = tuple("ENTITY_1 FOOD region ENTITY_2 CITY country ENTITY_3 COUNTRY".split())


MICRO_SEED = 44


def micro_model(seed: int = MICRO_SEED, hidden: int = 8, embed_dim: int = 8, spread: float = 2.0):
    """Vocab of 12 (4 reserved + 8 tokens), two triples, tiny dimensions.

    ``spread`` widens the word vectors. With near-identical memory rows the
    attention gradients shrink to ~1e-9, below the roundoff of a central
    difference at eps=1e-5, and the relative error stops measuring anything.
    """
    mex = MaskedExample(Example(MICRO_TRIPLES, (MICRO_REFERENCE,)))
    vocab = build_vocab([mex])
    rng = np.random.default_rng(seed)
    params = init_params(Dims(len(vocab), embed_dim, hidden, 2), rng)
    for t in params.values():  # move off the symmetric zero biases
        t.data += 0.1 * rng.normal(size=t.shape)
    params["embed"].data += spread * rng.normal(size=params["embed"].shape)
    inputs = graph_inputs(MICRO_TRIPLES, vocab)
    target = tuple(vocab.encode(MICRO_REFERENCE)) + (EOS_ID,)
    sample = tuple(int(i) for i in rng.integers(4, len(vocab), size=5)) + (EOS_ID,)
    return vocab, params, inputs, target, sample


def hybrid_objective(params, inputs, target, sample, gamma: float = 0.3,
                     r_sample: float = 2.0, r_baseline: float = 1.0) -> Tensor:
    enc = encode_inputs(inputs, params)
    l_g = cross_entropy_loss(teacher_forced(enc, params, target), target)
    logp = sequence_log_probs(teacher_forced(enc, params, sample), sample)
    return hybrid_loss(scst_loss(ad.sum_(logp), r_sample, r_baseline), l_g, gamma)


def check_model(seed: int = MICRO_SEED, eps: float = 1e-5) -> list[CheckRow]:
    vocab, params, inputs, target, sample = micro_model(seed)
    rows = []
    for name, p in params.items():
        err = ad.grad_check(lambda _: hybrid_objective(params, inputs, target, sample), p, eps)
        rows.append(CheckRow(f"hybrid_loss[{name}]", err))
    return rows


def format_table(rows: list[CheckRow]) -> str:
    width = max(len(r.name) for r in rows)
    lines = [f"{'check':<{width}}  {'max rel err':>12}  result"]
    lines += [f"{r.name:<{width}}  {r.error:>12.3e}  {'PASS' if r.ok else 'FAIL'}" for r in rows]
    return "\n".join(lines)
