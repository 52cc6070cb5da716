"""Templated toy corpus: each relation verbalizes with one fixed sentence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ie_reward import OBJECT_FIRST, SUBJECT_FIRST, Lexicon
from .triples import Example, Triple, split_relation

ENTITIES = {
    "PERSON": ["alan shepard", "ada lovelace", "niels bohr", "grace hopper", "marie curie", "alan turing"],
    "CITY": ["paris", "new york", "ankara", "derbyshire dales", "lyon", "oslo"],
    "COUNTRY": ["france", "turkey", "norway", "united states", "denmark"],
    "FOOD": ["bakewell pudding", "baklava", "ratatouille", "lutefisk", "apple pie"],
    "INGREDIENT": ["almond", "honey", "eggplant", "cod", "butter"],
}


@dataclass(frozen=True)
class Relation:
    label: str
    subject_type: str
    object_type: str
    template: str  # "{s}" / "{o}" placeholders
    trigger: str
    order: str


RELATIONS = (
    Relation("birthPlace", "PERSON", "CITY", "{s} was born in {o} .", "was born in", SUBJECT_FIRST),
    Relation("country", "CITY", "COUNTRY", "{s} is located in {o} .", "is located in", SUBJECT_FIRST),
    Relation("capital", "COUNTRY", "CITY", "{s} has its capital in {o} .", "has its capital in", SUBJECT_FIRST),
    Relation("leaderName", "COUNTRY", "PERSON", "{o} leads {s} .", "leads", OBJECT_FIRST),
    Relation("region", "FOOD", "CITY", "{s} comes from {o} .", "comes from", SUBJECT_FIRST),
    Relation("ingredient", "FOOD", "INGREDIENT", "{s} contains {o} .", "contains", SUBJECT_FIRST),
    Relation("dishVariation", "FOOD", "FOOD", "{o} is a variation of {s} .", "is a variation of", OBJECT_FIRST),
    Relation("nationality", "PERSON", "COUNTRY", "{s} is a citizen of {o} .", "is a citizen of", SUBJECT_FIRST),
)


def type_dict() -> dict[str, str]:
    return {e: t for t, ents in ENTITIES.items() for e in ents}


def lexicon() -> Lexicon:
    lex = Lexicon()
    for rel in RELATIONS:
        lex.add(split_relation(rel.label), rel.trigger.split(), rel.order)
    return lex


def make_example(rng: np.random.Generator, n_triples: int) -> Example:
    """A connected triple set of the requested size, verbalized sentence by sentence."""
    rels = list(RELATIONS)
    while True:
        triples: list[Triple] = []
        sentences: list[str] = []
        known: list[tuple[str, str]] = []  # (entity, type)
        for _ in range(n_triples):
            if known:
                ent, etype = known[rng.integers(len(known))]
                options = [r for r in rels if r.subject_type == etype]
                if not options:
                    break
                rel = options[rng.integers(len(options))]
                subj = ent
            else:
                rel = rels[rng.integers(len(rels))]
                subj = ENTITIES[rel.subject_type][rng.integers(len(ENTITIES[rel.subject_type]))]
            pool = [e for e in ENTITIES[rel.object_type] if e != subj and all(e != k for k, _ in known)]
            if not pool:
                break
            obj = pool[rng.integers(len(pool))]
            t = Triple.from_raw(subj, rel.label, obj)
            if t in triples:
                break
            triples.append(t)
            sentences.append(rel.template.format(s=subj, o=obj))
            for e, ty in ((subj, rel.subject_type), (obj, rel.object_type)):
                if all(e != k for k, _ in known):
                    known.append((e, ty))
        if len(triples) == n_triples:
            return Example(tuple(triples), (tuple(" ".join(sentences).split()),))


def make_corpus(n: int, seed: int, min_triples: int = 1, max_triples: int = 3) -> list[Example]:
    """``n`` examples with distinct triple sets."""
    rng = np.random.default_rng(seed)
    out: list[Example] = []
    seen = set()
    while len(out) < n:
        ex = make_example(rng, int(rng.integers(min_triples, max_triples + 1)))
        if ex.triples not in seen:
            seen.add(ex.triples)
            out.append(ex)
    return out
