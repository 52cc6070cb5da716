import sys
import textwrap

import pytest
from hypothesis import given, settings, strategies as st

from g2t import synthetic
from g2t.ie_reward import (ANY_ORDER, OBJECT_FIRST, SUBJECT_FIRST, Extractor, Lexicon, bootstrap_lexicon,
                           extract_triples, lexicon_from_mapping, reward)
from g2t.triples import Example, Triple, normalize_text

GOLD = (
    Triple("alan shepard", "time in space", "130170 minutes"),
    Triple("alan shepard", "birth place", "new hampshire"),
    Triple("new hampshire", "bird", "purple finch"),
)
GENERATED = normalize_text("Alan Shepard was born in New Hampshire , where the purple finch is the bird .")
LEXICON = lexicon_from_mapping({"birthPlace": ["was born in"], "bird": [("bird", ANY_ORDER)],
                                "timeInSpace": ["in space"]})


def test_worked_example_reward_two():
    ex = Extractor(lexicon=LEXICON)
    found = extract_triples(GENERATED, GOLD, ex)
    assert found == {GOLD[1], GOLD[2]}
    assert reward(found, GOLD) == 2


def test_empty_text():
    assert Extractor(lexicon=LEXICON).extract((), GOLD) == set()


def test_template_text_extracts_single_triple():
    t = Triple("ada lovelace", "birth place", "paris")
    assert Extractor(lexicon=LEXICON).extract(normalize_text("ada lovelace was born in paris ."), [t, GOLD[0]]) == {t}


def test_order_flags():
    lex = Lexicon()
    lex.add("leader name", ["leads"], OBJECT_FIRST)
    t = Triple("france", "leader name", "marie curie")
    ex = Extractor(lexicon=lex)
    assert ex.extract(normalize_text("marie curie leads france ."), [t]) == {t}
    assert ex.extract(normalize_text("france leads marie curie ."), [t]) == set()
    lex2 = lexicon_from_mapping({"leaderName": [("leads", SUBJECT_FIRST)]})
    assert Extractor(lexicon=lex2).extract(normalize_text("marie curie leads france ."), [t]) == set()


def test_mentions_must_share_a_sentence():
    t = GOLD[1]
    text = normalize_text("alan shepard was born in . new hampshire is nice .")
    assert Extractor(lexicon=LEXICON).extract(text, [t]) == set()


def test_reward_normalizes_and_bounds():
    gold = [Triple("A  B", "Rel", "c")]
    assert reward({Triple("a b", "rel", "C")}, gold) == 1
    assert reward(set(), gold) == 0
    assert reward(set(gold), gold) == 1
    assert reward({Triple("x", "y", "z")}, gold) == 0


triples = st.builds(Triple, st.sampled_from(["a", "b", "c"]), st.sampled_from(["r", "s"]), st.sampled_from(["a", "d"]))


@settings(max_examples=100, deadline=None)
@given(st.sets(triples), st.lists(triples, min_size=1, max_size=4, unique=True), triples)
def test_reward_monotone(extracted, gold, extra):
    base = reward(extracted, gold)
    assert 0 <= base <= len(gold)
    grown = reward(extracted | {extra}, gold)
    assert grown == base + (extra in set(gold) and extra not in extracted)


def test_lexicon_file_roundtrip(tmp_path):
    path = tmp_path / "lex.tsv"
    LEXICON.save(path)
    assert Lexicon.load(path) == LEXICON
    path.write_text("birthPlace\tSO\n")
    with pytest.raises(ValueError):
        Lexicon.load(path)


def test_extractor_validation():
    with pytest.raises(ValueError):
        Extractor()
    with pytest.raises(ValueError):
        Extractor(lexicon=LEXICON, command="cat")
    with pytest.raises(ValueError):
        Lexicon().add("x", ["y"], "SIDEWAYS")


def test_bootstrap_recovers_synthetic_triggers():
    data = synthetic.make_corpus(40, seed=3)
    lex = bootstrap_lexicon(data)
    expected = synthetic.lexicon()
    for rel, trigs in lex.triggers.items():
        assert trigs[0] in expected.get(rel), rel
    ex = Extractor(lexicon=lex)
    for e in data:
        assert reward(ex.extract(e.references[0], e.triples), e.triples) == len(e.triples)


def test_bootstrap_ignores_cross_sentence_spans():
    e = Example((Triple("x", "r", "y"),), (normalize_text("x is here . y too ."),))
    assert bootstrap_lexicon([e]).triggers == {}


@pytest.fixture
def fake_extractor(tmp_path):
    script = tmp_path / "fake_ie.py"
    script.write_text(textwrap.dedent("""
        import json, sys
        for line in sys.stdin:
            words = line.split()
            out = [["alan shepard", "birth place", "new hampshire"]] if "born" in words else []
            print(json.dumps(out))
    """))
    return f"{sys.executable} {script}"


def test_external_extractor(fake_extractor):
    ex = Extractor(command=fake_extractor)
    assert ex.kind == "external"
    found = ex.extract_many([GENERATED, normalize_text("nothing here")], [GOLD, GOLD])
    assert found == [{GOLD[1]}, set()]


def test_external_failure_rewards_zero(caplog, tmp_path):
    bad = tmp_path / "bad.py"
    bad.write_text("import sys; sys.exit(3)\n")
    ex = Extractor(command=f"{sys.executable} {bad}")
    assert ex.extract(GENERATED, GOLD) == set()
    assert "rewarding 0" in caplog.text
    assert Extractor(command="/nonexistent/extractor").extract(GENERATED, GOLD) == set()
