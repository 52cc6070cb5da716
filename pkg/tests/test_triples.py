import io
import json

import pytest
from hypothesis import given, settings, strategies as st

from g2t.triples import (BOS, EOS, PAD, UNK, DatasetError, Example, MaskedExample, Triple, Vocab, build_vocab,
                         identity_mask, load_type_dict, mask_entities, normalize_entity, normalize_text,
                         parse_dataset, read_masked, split_relation, unmask_text, write_masked)


def record(triples, refs):
    return json.dumps({"triples": triples, "references": refs})


def test_split_relation():
    assert split_relation("birthPlace") == "birth place"
    assert split_relation("leaderName") == "leader name"
    assert split_relation("time_in_space") == "time in space"
    assert split_relation("ISBN_number") == "isbn number"


def test_normalize_entity_and_text():
    assert normalize_entity("Alan_Shepard") == "alan shepard"
    assert normalize_text("  Alan  Shepard was BORN .") == ("alan", "shepard", "was", "born", ".")


def test_parse_dataset_normalizes():
    [ex] = parse_dataset([record([["Alan_Shepard", "birthPlace", "New_Hampshire"]], ["Alan Shepard was born ."])])
    assert ex.triples == (Triple("alan shepard", "birth place", "new hampshire"),)
    assert ex.references == (("alan", "shepard", "was", "born", "."),)


def test_parse_dataset_dedups_triples_and_skips_blank_lines():
    t = ["a", "r", "b"]
    [ex] = parse_dataset(["", record([t, t], ["a r b"]), "   "])
    assert len(ex.triples) == 1


@pytest.mark.parametrize("line, fragment", [
    ("{not json", "line 1"),
    (record([], ["x"]), "triples"),
    (record([["a", "r"]], ["x"]), "3 strings"),
    (record([["a", "r", "b"]], []), "references"),
    (json.dumps({"triples": [["a", "r", "b"]]}), "references"),
])
def test_parse_dataset_errors_name_the_line(line, fragment):
    with pytest.raises(DatasetError, match=fragment):
        parse_dataset([line])


def test_mask_entities_worked():
    ex = parse_dataset([record([["Alan_Shepard", "birthPlace", "New_Hampshire"]],
                               ["Alan Shepard was born in New Hampshire ."])])[0]
    mex = mask_entities(ex, {"alan shepard": "person", "new hampshire": "STATE"})
    assert mex.triples == (Triple("ENTITY_1 PERSON", "birth place", "ENTITY_2 STATE"),)
    assert " ".join(mex.references[0]) == "ENTITY_1 PERSON was born in ENTITY_2 STATE ."
    assert mex.entity_map == {1: ("alan shepard", "PERSON"), 2: ("new hampshire", "STATE")}


def test_mask_unknown_type_defaults():
    ex = Example((Triple("x", "r", "y"),), (("x", "r", "y"),))
    assert mask_entities(ex, {}).triples[0].subject == "ENTITY_1 THING"


def test_mask_longest_mention_first():
    ex = Example((Triple("new york", "r", "york"),), (("new", "york", "and", "york"),))
    mex = mask_entities(ex, {})
    assert " ".join(mex.references[0]) == "ENTITY_1 THING and ENTITY_2 THING"


def test_mask_is_idempotent():
    ex = Example((Triple("alan shepard", "r", "ohio"),), (("alan", "shepard", "r", "ohio"),))
    once = mask_entities(ex, {})
    twice = mask_entities(once.example, {})
    assert twice.example == once.example
    assert twice.entity_map == {}


def test_unmask_inverts_mask():
    ex = Example((Triple("alan shepard", "birth place", "new hampshire"),),
                 (("alan", "shepard", "was", "born", "in", "new", "hampshire"),))
    mex = mask_entities(ex, {"alan shepard": "PERSON"})
    assert unmask_text(mex.references[0], mex.entity_map) == ex.references[0]


def test_unmask_without_type_token_and_unknown_id(caplog):
    emap = {1: ("paris", "CITY")}
    assert unmask_text(("ENTITY_1", "is", "nice"), emap) == ("paris", "is", "nice")
    assert unmask_text(("ENTITY_9", "x"), emap) == ("ENTITY_9", "x")
    assert "not in entity map" in caplog.text


words = st.sampled_from(["ann", "bob", "cat", "dog", "eve", "fox", "likes", "sees", "the"])
phrases = st.lists(words, min_size=1, max_size=3).map(" ".join)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(phrases, st.sampled_from(["r1", "r2"]), phrases), min_size=1, max_size=3, unique=True),
       st.data())
def test_mask_roundtrip_property(raw, data):
    triples = tuple(Triple(*t) for t in raw)
    entities = list(dict.fromkeys(e for t in triples for e in (t.subject, t.object)))
    # a reference that mentions each entity once, separated by a marker word
    ref = []
    for e in data.draw(st.permutations(entities)):
        ref.extend(e.split())
        ref.append("|")
    mex = mask_entities(Example(triples, (tuple(ref),)), {})
    assert len(mex.entity_map) == len(entities)
    # masking is idempotent, and unmasking every non-overlapping mention restores the text
    assert mask_entities(mex.example, {}).example == mex.example
    if all(not (a != b and f" {a} " in f" {b} ") for a in entities for b in entities):
        assert unmask_text(mex.references[0], mex.entity_map) == tuple(ref)


def test_vocab_hand_enumeration():
    corpus = [
        Example((Triple("a", "likes", "b"),), (("a", "likes", "b", "."),)),
        Example((Triple("b", "likes", "c"),), (("b", "likes", "c", "."),)),
        Example((Triple("a", "hates", "c"),), (("a", "hates", "c"),)),
    ]
    # counts: a,b,c,likes = 4; hates = 2; "." = 2
    assert build_vocab(corpus).itos == (PAD, UNK, BOS, EOS, "a", "b", "c", "likes", ".", "hates")
    v = build_vocab(corpus, min_freq=3)
    assert v.itos[4:] == ("a", "b", "c", "likes")
    assert v.encode(["hates", "a"]) == [1, 4]


def test_vocab_deterministic_under_corpus_order():
    corpus = [Example((Triple("a", "r", "b"),), (("x", "y"),)), Example((Triple("c", "r", "d"),), (("y", "z"),))]
    assert build_vocab(corpus) == build_vocab(corpus[::-1])


def test_vocab_file_roundtrip(tmp_path):
    v = Vocab((PAD, UNK, BOS, EOS, "hello", "world"))
    v.save(tmp_path / "v.txt")
    assert Vocab.load(tmp_path / "v.txt") == v
    with pytest.raises(ValueError):
        Vocab(("x", UNK, BOS, EOS))


def test_masked_file_roundtrip(tmp_path):
    ex = Example((Triple("alan shepard", "birth place", "ohio"),), (("alan", "shepard", "from", "ohio"),))
    mex = mask_entities(ex, {"ohio": "STATE"})
    buf = io.StringIO()
    write_masked([mex, identity_mask(ex)], buf)
    path = tmp_path / "m.jsonl"
    path.write_text(buf.getvalue())
    back = read_masked(path)
    assert back[0] == mex
    assert back[1] == MaskedExample(ex, {})


def test_type_dict(tmp_path):
    p = tmp_path / "types.tsv"
    p.write_text("Alan_Shepard\tperson\n\nOhio\tSTATE\n")
    assert load_type_dict(p) == {"alan shepard": "PERSON", "ohio": "STATE"}
    p.write_text("broken line\n")
    with pytest.raises(DatasetError):
        load_type_dict(p)


def test_example_validation():
    with pytest.raises(ValueError):
        Example((), (("x",),))
    with pytest.raises(ValueError):
        Triple("", "r", "o")
