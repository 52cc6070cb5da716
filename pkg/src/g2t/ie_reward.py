"""Triple extraction from generated text and the correct-triple-count reward."""
from __future__ import annotations

import json
import logging
import shlex
import subprocess
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .triples import Example, MaskedExample, Triple, split_relation

log = logging.getLogger(__name__)

SUBJECT_FIRST, OBJECT_FIRST, ANY_ORDER = "SO", "OS", "ANY"
ORDER_FLAGS = (SUBJECT_FIRST, OBJECT_FIRST, ANY_ORDER)
SENTENCE_END = {".", "!", "?"}


@dataclass(frozen=True)
class Trigger:
    tokens: tuple[str, ...]
    order: str = SUBJECT_FIRST

    def __post_init__(self):
        if self.order not in ORDER_FLAGS:
            raise ValueError(f"unknown order flag {self.order!r}")
        if not self.tokens:
            raise ValueError("empty trigger")


@dataclass
class Lexicon:
    """Relation (normalized label) -> trigger phrases."""

    triggers: dict[str, list[Trigger]] = field(default_factory=dict)

    def add(self, relation: str, tokens: Sequence[str], order: str = SUBJECT_FIRST) -> None:
        trig = Trigger(tuple(tokens), order)
        bucket = self.triggers.setdefault(_norm(relation), [])
        if trig not in bucket:
            bucket.append(trig)

    def get(self, relation: str) -> list[Trigger]:
        return self.triggers.get(_norm(relation), [])

    def save(self, path: str | Path) -> None:
        lines = [f"{rel}\t{t.order}\t{' '.join(t.tokens)}\n"
                 for rel, trigs in self.triggers.items() for t in trigs]
        Path(path).write_text("".join(lines), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Lexicon":
        lex = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected relation<TAB>order<TAB>trigger")
                rel, order, trig = parts
                lex.add(split_relation(rel), trig.lower().split(), order.strip().upper())
        return lex


def _norm(s: str) -> str:
    return " ".join(s.lower().split())


def normalize_triple(t: Triple) -> tuple[str, str, str]:
    return (_norm(t.subject), _norm(t.relation), _norm(t.object))


def sentences(tokens: Sequence[str]) -> list[list[str]]:
    out: list[list[str]] = [[]]
    for tok in tokens:
        out[-1].append(tok)
        if tok in SENTENCE_END:
            out.append([])
    return [s for s in out if s]


def _find(seq: Sequence[str], sub: Sequence[str]) -> int:
    k = len(sub)
    for i in range(len(seq) - k + 1):
        if tuple(seq[i:i + k]) == tuple(sub):
            return i
    return -1


def _mention(sentence: Sequence[str], entity: str) -> int:
    """Position of an entity mention, or -1 if some entity token is missing.

    A contiguous occurrence is preferred; otherwise the first entity token's
    position stands in for the mention.
    """
    toks = entity.lower().split()
    if not toks or any(t not in sentence for t in toks):
        return -1
    pos = _find(sentence, toks)
    return pos if pos >= 0 else list(sentence).index(toks[0])


def _builtin_extract(text: Sequence[str], candidates: Iterable[Triple], lexicon: Lexicon) -> set[Triple]:
    found = set()
    sents = sentences([t.lower() for t in text])
    for cand in candidates:
        triggers = lexicon.get(cand.relation)
        if not triggers:
            continue
        for sent in sents:
            s_pos = _mention(sent, cand.subject)
            o_pos = _mention(sent, cand.object)
            if s_pos < 0 or o_pos < 0:
                continue
            hit = False
            for trig in triggers:
                if _find(sent, trig.tokens) < 0:
                    continue
                if trig.order == SUBJECT_FIRST and not s_pos < o_pos:
                    continue
                if trig.order == OBJECT_FIRST and not o_pos < s_pos:
                    continue
                hit = True
                break
            if hit:
                found.add(cand)
                break
    return found


class Extractor:
    """Builtin lexicon matcher, or a line-oriented external process."""

    def __init__(self, lexicon: Lexicon | None = None, command: str | None = None, timeout: float = 60.0):
        if (lexicon is None) == (command is None):
            raise ValueError("give exactly one of a lexicon or an external command")
        if lexicon is not None and any(not v for v in lexicon.triggers.values()):
            raise ValueError("every registered relation needs at least one trigger")
        self.lexicon = lexicon
        self.command = command
        self.timeout = timeout
        self._lock = threading.Lock()

    @property
    def kind(self) -> str:
        return "builtin" if self.lexicon is not None else "external"

    def extract(self, text: Sequence[str], candidates: Sequence[Triple]) -> set[Triple]:
        return self.extract_many([text], [candidates])[0]

    def extract_many(self, texts: Sequence[Sequence[str]],
                     candidates: Sequence[Sequence[Triple]]) -> list[set[Triple]]:
        if self.lexicon is not None:
            return [_builtin_extract(t, c, self.lexicon) for t, c in zip(texts, candidates)]
        with self._lock:
            return self._run_external(texts)

    def _run_external(self, texts: Sequence[Sequence[str]]) -> list[set[Triple]]:
        empty: list[set[Triple]] = [set() for _ in texts]
        payload = "".join(" ".join(t) + "\n" for t in texts)
        try:
            proc = subprocess.run(shlex.split(self.command), input=payload, capture_output=True,
                                  text=True, timeout=self.timeout, check=True)
            lines = proc.stdout.splitlines()
            if len(lines) != len(texts):
                raise ValueError(f"extractor returned {len(lines)} lines for {len(texts)} texts")
            out = []
            for line in lines:
                triples = set()
                for item in json.loads(line):
                    s, r, o = item
                    triples.add(Triple(s, r, o))
                out.append(triples)
            return out
        except (OSError, subprocess.SubprocessError, ValueError, TypeError) as exc:
            log.warning("external extractor failed (%s); rewarding 0", exc)
            return empty


def extract_triples(text: Sequence[str], candidates: Sequence[Triple], ex: Extractor) -> set[Triple]:
    return ex.extract(text, candidates)


def reward(extracted: Iterable[Triple], gold: Iterable[Triple]) -> int:
    """Number of distinct extracted triples equal to a gold triple after normalization."""
    gold_set = {normalize_triple(t) for t in gold}
    return len({normalize_triple(t) for t in extracted} & gold_set)


def bootstrap_lexicon(data: Iterable[Example | MaskedExample], top_k: int = 5, max_span: int = 8) -> Lexicon:
    """Collect the token spans between subject and object mentions in references.

    Only mentions inside the same sentence count, matching how the builtin
    extractor reads text.

    Spans are counted per (relation, order) and the ``top_k`` most frequent
    per relation are kept (ties broken lexicographically).
    """
    counts: dict[str, Counter] = defaultdict(Counter)
    for ex in data:
        for t in ex.triples:
            s_toks, o_toks = t.subject.lower().split(), t.object.lower().split()
            for ref in ex.references:
                for sent in sentences([w.lower() for w in ref]):
                    s, o = _find(sent, s_toks), _find(sent, o_toks)
                    if s < 0 or o < 0:
                        continue
                    if s < o:
                        span, order = sent[s + len(s_toks):o], SUBJECT_FIRST
                    else:
                        span, order = sent[o + len(o_toks):s], OBJECT_FIRST
                    if 0 < len(span) <= max_span:
                        counts[_norm(t.relation)][(order, tuple(span))] += 1
    lex = Lexicon()
    for rel in sorted(counts):
        ranked = sorted(counts[rel].items(), key=lambda kv: (-kv[1], kv[0]))
        for (order, span), _ in ranked[:top_k]:
            lex.add(rel, span, order)
    return lex


def lexicon_from_mapping(mapping: Mapping[str, Sequence[str | tuple[str, str]]]) -> Lexicon:
    """Convenience: ``{"birthPlace": ["born in", ("bird", "ANY")]}``."""
    lex = Lexicon()
    for rel, items in mapping.items():
        for item in items:
            phrase, order = (item, SUBJECT_FIRST) if isinstance(item, str) else item
            lex.add(split_relation(rel), phrase.lower().split(), order)
    return lex
