"""Corpus BLEU (multi-bleu style), TER with greedy block shifts, bucketed reports."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .triples import Example

MAX_ORDER = 4
MAX_SHIFT_SIZE = 10
MAX_SHIFT_DIST = 50
MAX_SHIFT_CANDIDATES = 1000
DEFAULT_BUCKETS = ((1, 3), (4, 7))

Tokens = Sequence[str]


def ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


@dataclass
class BleuResult:
    score: float
    precisions: list[float]
    matches: list[int]
    totals: list[int]
    brevity_penalty: float
    hyp_len: int
    ref_len: int


def _closest_ref_len(hyp_len: int, refs: Sequence[Tokens]) -> int:
    return min((abs(len(r) - hyp_len), len(r)) for r in refs)[1]


def bleu_stats(hyp: Tokens, refs: Sequence[Tokens], max_order: int = MAX_ORDER):
    matches = [0] * max_order
    totals = [0] * max_order
    for n in range(1, max_order + 1):
        hyp_counts = ngrams(hyp, n)
        max_ref: Counter = Counter()
        for r in refs:
            max_ref |= ngrams(r, n)
        matches[n - 1] = sum(min(c, max_ref[g]) for g, c in hyp_counts.items())
        totals[n - 1] = max(len(hyp) - n + 1, 0)
    return matches, totals, len(hyp), _closest_ref_len(len(hyp), refs)


def _combine(matches, totals, hyp_len, ref_len, smooth: float = 0.0) -> BleuResult:
    """Geometric mean over the orders that occur at all (effective order).

    An order with no n-grams anywhere (every candidate shorter than n) has an
    undefined precision; it is reported as 0 and left out of the mean, so an
    identical short corpus still scores 1.
    """
    precisions = []
    used = []
    for n, (m, t) in enumerate(zip(matches, totals)):
        if t == 0:
            precisions.append(0.0)
            continue
        p = smooth / t if m == 0 and smooth > 0 and n > 0 else m / t
        precisions.append(p)
        used.append(p)
    if hyp_len == 0 or not used or min(used) <= 0.0:
        score = 0.0
    else:
        score = math.exp(sum(math.log(p) for p in used) / len(used))
    bp = math.exp(min(0.0, 1.0 - ref_len / hyp_len)) if hyp_len > 0 else 0.0
    return BleuResult(score * bp, precisions, list(matches), list(totals), bp, hyp_len, ref_len)


def bleu(candidates: Sequence[Tokens], references: Sequence[Sequence[Tokens]],
         max_order: int = MAX_ORDER) -> BleuResult:
    """Corpus BLEU with clipped counts, uniform weights and no smoothing."""
    if not candidates:
        raise ValueError("empty candidate list")
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} reference sets")
    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = ref_len = 0
    for hyp, refs in zip(candidates, references):
        if not refs:
            raise ValueError("every candidate needs at least one reference")
        m, t, h, r = bleu_stats(hyp, refs, max_order)
        matches = [a + b for a, b in zip(matches, m)]
        totals = [a + b for a, b in zip(totals, t)]
        hyp_len += h
        ref_len += r
    return _combine(matches, totals, hyp_len, ref_len)


def sentence_bleu(hyp: Tokens, refs: Sequence[Tokens], epsilon: float = 1e-9) -> float:
    """Diagnostics only: add-epsilon on zero higher-order precisions."""
    m, t, h, r = bleu_stats(hyp, refs)
    return _combine(m, t, h, r, smooth=epsilon).score


# --- TER ---------------------------------------------------------------------

@dataclass
class TerResult:
    score: float
    edits: int
    ref_len: int
    shifts: int = 0


def _alignment(ops: np.ndarray, n_ref: int):
    """Per-word error flags and ref->hyp alignment from forward op codes."""
    hyp_err: list[int] = []
    ref_err: list[int] = []
    align: dict[int, int] = {}
    ph = pr = -1
    for op in ops.tolist():
        if op in (_kernels.MATCH, _kernels.SUB):
            ph += 1
            pr += 1
            align[pr] = ph
            flag = int(op == _kernels.SUB)
            hyp_err.append(flag)
            ref_err.append(flag)
        elif op == _kernels.EXTRA_HYP:
            ph += 1
            hyp_err.append(1)
        else:
            pr += 1
            align[pr] = ph
            ref_err.append(1)
    return align, hyp_err, ref_err


def _shift(words: tuple, start: int, length: int, target: int) -> tuple | None:
    block = words[start:start + length]
    rest = words[:start] + words[start + length:]
    if target <= start:
        pos = target
    elif target >= start + length:
        pos = target - length
    else:
        return None
    out = rest[:pos] + block + rest[pos:]
    return None if out == words else out


class _EditCache:
    def __init__(self, ref_ids: np.ndarray):
        self.ref = ref_ids
        self.cache: dict[tuple, int] = {}

    def distance(self, hyp: tuple) -> int:
        d = self.cache.get(hyp)
        if d is None:
            d = _kernels.edit_distance(np.array(hyp, dtype=np.int64), self.ref)
            self.cache[hyp] = d
        return d


def _best_shift(hyp: tuple, ref: tuple, cache: _EditCache, budget: list[int]):
    score, ops = _kernels.align(np.array(hyp, dtype=np.int64), cache.ref)
    align, hyp_err, ref_err = _alignment(ops, len(ref))
    ref_positions: dict[tuple, list[int]] = {}
    for j in range(len(ref)):
        for k in range(1, min(MAX_SHIFT_SIZE, len(ref) - j) + 1):
            ref_positions.setdefault(ref[j:j + k], []).append(j)

    best = None
    for sh in range(len(hyp)):
        for length in range(1, min(MAX_SHIFT_SIZE, len(hyp) - sh) + 1):
            span = hyp[sh:sh + length]
            starts = ref_positions.get(span)
            if not starts:
                break
            if not any(hyp_err[sh:sh + length]):
                continue
            for sr in starts:
                if abs(sr - sh) > MAX_SHIFT_DIST:
                    continue
                if not any(ref_err[sr:sr + length]):
                    continue
                if sh <= align.get(sr, -1) < sh + length:
                    continue
                tried = set()
                for off in range(-1, length):
                    if sr + off == -1:
                        target = 0
                    elif sr + off in align:
                        target = align[sr + off] + 1
                    else:
                        break
                    if target in tried:
                        continue
                    tried.add(target)
                    shifted = _shift(hyp, sh, length, target)
                    if shifted is None:
                        continue
                    budget[0] += 1
                    cand = (score - cache.distance(shifted), length, -sh, -target, shifted)
                    if best is None or cand[:4] > best[:4]:
                        best = cand
                if budget[0] >= MAX_SHIFT_CANDIDATES:
                    return best
    return best


def ter_edits(hyp: Tokens, ref: Tokens) -> tuple[int, int]:
    """(total edits incl. shifts, number of shifts) turning ``hyp`` into ``ref``."""
    vocab: dict[str, int] = {}
    h = tuple(vocab.setdefault(w, len(vocab)) for w in hyp)
    r = tuple(vocab.setdefault(w, len(vocab)) for w in ref)
    cache = _EditCache(np.array(r, dtype=np.int64))
    shifts = 0
    budget = [0]
    while True:
        best = _best_shift(h, r, cache, budget)
        if best is None or best[0] <= 0:
            break
        shifts += 1
        h = best[4]
        if budget[0] >= MAX_SHIFT_CANDIDATES:
            break
    return shifts + cache.distance(h), shifts


def ter(candidate: Tokens, references: Sequence[Tokens]) -> TerResult:
    """Best (lowest) rate over references: edits / reference length."""
    if not references:
        raise ValueError("ter needs at least one reference")
    best = None
    for ref in references:
        edits, shifts = ter_edits(candidate, ref)
        if len(ref) == 0:
            rate = 0.0 if edits == 0 else 1.0
        else:
            rate = edits / len(ref)
        if best is None or rate < best.score:
            best = TerResult(rate, edits, len(ref), shifts)
    return best


def corpus_ter(candidates: Sequence[Tokens], references: Sequence[Sequence[Tokens]]) -> TerResult:
    """Sum of per-sentence best edits over the sum of the chosen reference lengths."""
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} reference sets")
    edits = ref_len = shifts = 0
    for hyp, refs in zip(candidates, references):
        r = ter(hyp, refs)
        edits += r.edits
        ref_len += r.ref_len
        shifts += r.shifts
    score = edits / ref_len if ref_len else float(edits > 0)
    return TerResult(score, edits, ref_len, shifts)


# --- reports -----------------------------------------------------------------

@dataclass
class EvalReport:
    bleu: float
    precisions: list[float]
    brevity_penalty: float
    ter: float
    count: int
    buckets: dict[str, "EvalReport"] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "bleu": self.bleu,
            "precisions": self.precisions,
            "brevity_penalty": self.brevity_penalty,
            "ter": self.ter,
            "count": self.count,
        }
        if self.buckets:
            out["buckets"] = {k: v.to_dict() for k, v in self.buckets.items()}
        if self.notes:
            out["notes"] = list(self.notes)
        return out

    def to_table(self) -> str:
        rows = [("all", self)] + [(f"size {k}", v) for k, v in self.buckets.items()]
        lines = [f"{'subset':<12} {'n':>6} {'BLEU':>8} {'TER':>8}   p1/p2/p3/p4"]
        for name, rep in rows:
            ps = "/".join(f"{100 * p:.1f}" for p in rep.precisions)
            lines.append(f"{name:<12} {rep.count:>6} {100 * rep.bleu:>8.2f} {100 * rep.ter:>8.2f}   {ps}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def evaluate(candidates: Sequence[Tokens], references: Sequence[Sequence[Tokens]]) -> EvalReport:
    b = bleu(candidates, references)
    t = corpus_ter(candidates, references)
    return EvalReport(b.score, b.precisions, b.brevity_penalty, t.score, len(candidates))


def evaluate_split(generated: Sequence[Tokens], dataset: Sequence[Example],
                   buckets: Sequence[tuple[int, int]] = DEFAULT_BUCKETS) -> EvalReport:
    """Overall scores plus one report per triple-set-size bucket (inclusive bounds)."""
    if len(generated) != len(dataset):
        raise ValueError(f"misaligned inputs: {len(generated)} generated lines vs {len(dataset)} examples")
    refs = [ex.references for ex in dataset]
    report = evaluate(generated, refs)
    for lo, hi in buckets:
        idx = [i for i, ex in enumerate(dataset) if lo <= len(ex.triples) <= hi]
        key = f"{lo}-{hi}"
        if not idx:
            report.notes.append(f"bucket {key} has no examples; omitted")
            continue
        report.buckets[key] = evaluate([generated[i] for i in idx], [refs[i] for i in idx])
    return report
