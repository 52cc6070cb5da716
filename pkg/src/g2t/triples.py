"""Triples, examples, entity masking and vocabulary construction."""
from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

log = logging.getLogger(__name__)

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
PAD_ID, UNK_ID, BOS_ID, EOS_ID = 0, 1, 2, 3
RESERVED = (PAD, UNK, BOS, EOS)

DEFAULT_TYPE = "THING"
MASK_RE = re.compile(r"^ENTITY_(\d+)$")

_CAMEL_1 = re.compile(r"([a-z0-9])([A-Z])")
_CAMEL_2 = re.compile(r"([A-Z]+)([A-Z][a-z])")


class DatasetError(ValueError):
    pass


def split_relation(label: str) -> str:
    """``"dishVariation"`` -> ``"dish variation"``; underscores become spaces."""
    s = _CAMEL_2.sub(r"\1 \2", label)
    s = _CAMEL_1.sub(r"\1 \2", s)
    return " ".join(s.replace("_", " ").lower().split())


def normalize_entity(surface: str) -> str:
    return " ".join(surface.replace("_", " ").lower().split())


def normalize_text(text: str) -> tuple[str, ...]:
    return tuple(text.lower().split())


@dataclass(frozen=True)
class Triple:
    subject: str
    relation: str
    object: str

    def __post_init__(self):
        for name in ("subject", "relation", "object"):
            value = " ".join(getattr(self, name).split())
            if not value:
                raise ValueError(f"empty {name} in triple {self!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_raw(cls, s: str, r: str, o: str) -> "Triple":
        return cls(normalize_entity(s), split_relation(r), normalize_entity(o))

    def normalized(self) -> "Triple":
        return Triple(*(" ".join(x.lower().split()) for x in self))

    def __iter__(self):
        return iter((self.subject, self.relation, self.object))


@dataclass(frozen=True)
class Example:
    triples: tuple[Triple, ...]
    references: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "triples", tuple(self.triples))
        object.__setattr__(self, "references", tuple(tuple(r) for r in self.references))
        if not self.triples:
            raise ValueError("an example needs at least one triple")
        if not self.references:
            raise ValueError("an example needs at least one reference")
        if len(set(self.triples)) != len(self.triples):
            raise ValueError("duplicate triples in example")


@dataclass(frozen=True)
class MaskedExample:
    example: Example
    entity_map: Mapping[int, tuple[str, str]] = field(default_factory=dict)

    @property
    def triples(self) -> tuple[Triple, ...]:
        return self.example.triples

    @property
    def references(self) -> tuple[tuple[str, ...], ...]:
        return self.example.references


def _parse_record(obj, lineno: int) -> Example:
    if not isinstance(obj, dict) or "triples" not in obj or "references" not in obj:
        raise DatasetError(f"line {lineno}: record needs 'triples' and 'references'")
    raw_triples, raw_refs = obj["triples"], obj["references"]
    if not isinstance(raw_triples, list) or not raw_triples:
        raise DatasetError(f"line {lineno}: empty or malformed 'triples'")
    if isinstance(raw_refs, str):
        raw_refs = [raw_refs]
    if not isinstance(raw_refs, list) or not raw_refs:
        raise DatasetError(f"line {lineno}: empty or malformed 'references'")
    triples: list[Triple] = []
    for t in raw_triples:
        if not (isinstance(t, (list, tuple)) and len(t) == 3 and all(isinstance(x, str) for x in t)):
            raise DatasetError(f"line {lineno}: triple must be 3 strings, got {t!r}")
        try:
            triple = Triple.from_raw(*t)
        except ValueError as exc:
            raise DatasetError(f"line {lineno}: {exc}") from None
        if triple not in triples:
            triples.append(triple)
    refs = []
    for r in raw_refs:
        if not isinstance(r, str):
            raise DatasetError(f"line {lineno}: reference must be a string")
        refs.append(normalize_text(r))
    return Example(tuple(triples), tuple(refs))


def parse_dataset(stream: Iterable[str]) -> list[Example]:
    """Parse line-delimited JSON records into examples.

    Blank lines are skipped. Duplicate triples inside a record are dropped,
    keeping the first occurrence.
    """
    out = []
    for lineno, line in enumerate(stream, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"line {lineno}: malformed record ({exc.msg})") from None
        out.append(_parse_record(obj, lineno))
    return out


def load_dataset(path: str | Path) -> list[Example]:
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh)


def load_type_dict(path: str | Path) -> dict[str, str]:
    types = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 'surface<TAB>type'")
            types[normalize_entity(parts[0])] = parts[1].strip().upper()
    return types


# --- masking -----------------------------------------------------------------

def _is_masked(entity: str) -> bool:
    return bool(MASK_RE.match(entity.split()[0]))


def _replace_spans(tokens: Sequence[str], mentions: list[tuple[tuple[str, ...], tuple[str, ...]]]):
    """Replace non-overlapping mentions, longest first, left to right within a length."""
    n = len(tokens)
    claimed = [False] * n
    starts: dict[int, tuple[int, tuple[str, ...]]] = {}
    for surface, replacement in mentions:
        k = len(surface)
        i = 0
        while i + k <= n:
            if tuple(tokens[i:i + k]) == surface and not any(claimed[i:i + k]):
                for j in range(i, i + k):
                    claimed[j] = True
                starts[i] = (k, replacement)
                i += k
            else:
                i += 1
    out: list[str] = []
    i = 0
    while i < n:
        if i in starts:
            k, replacement = starts[i]
            out.extend(replacement)
            i += k
        else:
            out.append(tokens[i])
            i += 1
    return tuple(out)


def mask_entities(ex: Example, type_dict: Mapping[str, str]) -> MaskedExample:
    """Replace entity surfaces by ``ENTITY_<eid> <TYPE>`` in triples and references.

    Ids are assigned per example in first-occurrence order over the triple
    list (subject before object). Already-masked entities pass through.
    """
    eids: dict[str, int] = {}
    entity_map: dict[int, tuple[str, str]] = {}
    taken = [int(MASK_RE.match(e.split()[0]).group(1))
             for t in ex.triples for e in (t.subject, t.object) if _is_masked(e)]
    next_id = max(taken, default=0) + 1
    replacement: dict[str, str] = {}
    for t in ex.triples:
        for ent in (t.subject, t.object):
            if ent in replacement or _is_masked(ent):
                continue
            eid = next_id
            next_id += 1
            etype = type_dict.get(ent, DEFAULT_TYPE).upper()
            eids[ent] = eid
            entity_map[eid] = (ent, etype)
            replacement[ent] = f"ENTITY_{eid} {etype}"

    def sub(e: str) -> str:
        return replacement.get(e, e)

    triples = tuple(Triple(sub(t.subject), t.relation, sub(t.object)) for t in ex.triples)
    mentions = sorted(
        ((tuple(surf.split()), tuple(rep.split())) for surf, rep in replacement.items()),
        key=lambda m: (-len(m[0]), eids[" ".join(m[0])]),
    )
    refs = tuple(_replace_spans(r, mentions) for r in ex.references)
    return MaskedExample(Example(triples, refs), entity_map)


def identity_mask(ex: Example) -> MaskedExample:
    return MaskedExample(ex, {})


def unmask_text(tokens: Sequence[str], entity_map: Mapping[int, tuple[str, str]]) -> tuple[str, ...]:
    out: list[str] = []
    i = 0
    while i < len(tokens):
        m = MASK_RE.match(tokens[i])
        if m is None:
            out.append(tokens[i])
            i += 1
            continue
        eid = int(m.group(1))
        if eid not in entity_map:
            log.warning("entity id %d not in entity map; leaving tokens unchanged", eid)
            out.append(tokens[i])
            i += 1
            continue
        surface, etype = entity_map[eid]
        type_toks = etype.split()
        i += 1
        if tuple(tokens[i:i + len(type_toks)]) == tuple(type_toks):
            i += len(type_toks)
        out.extend(surface.split())
    return tuple(out)


# --- vocabulary --------------------------------------------------------------

@dataclass(frozen=True)
class Vocab:
    itos: tuple[str, ...]

    def __post_init__(self):
        if tuple(self.itos[:4]) != RESERVED:
            raise ValueError("reserved tokens must occupy indices 0-3")
        if len(set(self.itos)) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")
        object.__setattr__(self, "_stoi", {t: i for i, t in enumerate(self.itos)})

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self._stoi

    def index(self, token: str) -> int:
        return self._stoi.get(token, UNK_ID)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self._stoi.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.itos), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        return cls(tuple(Path(path).read_text(encoding="utf-8").splitlines()))


def example_tokens(ex: MaskedExample | Example) -> Iterable[str]:
    for t in ex.triples:
        for part in t:
            yield from part.split()
    for ref in ex.references:
        yield from ref


def build_vocab(corpus: Iterable[MaskedExample | Example], min_freq: int = 1) -> Vocab:
    """Tokens with count >= ``min_freq``, ordered by frequency then lexicographically."""
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts: Counter[str] = Counter()
    for ex in corpus:
        counts.update(example_tokens(ex))
    for tok in RESERVED:
        counts.pop(tok, None)
    kept = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
    return Vocab(RESERVED + tuple(kept))


# --- masked dataset files ----------------------------------------------------

def masked_to_record(mex: MaskedExample) -> dict:
    return {
        "triples": [list(t) for t in mex.triples],
        "references": [" ".join(r) for r in mex.references],
        "entity_map": {str(k): list(v) for k, v in mex.entity_map.items()},
    }


def masked_from_record(obj: dict) -> MaskedExample:
    triples = tuple(Triple(*t) for t in obj["triples"])
    refs = tuple(tuple(r.split()) for r in obj["references"])
    emap = {int(k): (v[0], v[1]) for k, v in obj.get("entity_map", {}).items()}
    return MaskedExample(Example(triples, refs), emap)


def write_masked(items: Iterable[MaskedExample], fh: IO[str]) -> None:
    for mex in items:
        fh.write(json.dumps(masked_to_record(mex), ensure_ascii=False) + "\n")


def read_masked(path: str | Path) -> list[MaskedExample]:
    """Read a preprocessed file; records are taken verbatim (no re-normalization)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(masked_from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad masked record ({exc})") from None
    return out
