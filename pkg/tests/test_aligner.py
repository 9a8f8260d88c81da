import random

import pytest

from csaug.aligner import (
    EmptyReconstruction,
    InternalInvariantViolation,
    align_corpus,
    align_one,
    label_multiset,
    reconstruct_parse,
)
from csaug.genclient import GenerationRequest, mock_generate
from csaug.marker import mark_utterance, strip_marks
from csaug.spanfilter import validate_pair
from csaug.synthetic import HINGLISH_TABLE, random_corpus, random_utterance
from csaug.top import ParseTree, Utterance, exact_match, intent, parse_top, slot

ALARM_EN = (
    "[IN:CREATE_ALARM Set me an alarm [SL:DATE_TIME_RECURRING every Thursday at 5AM ] "
    "[SL:DATE_TIME until the 1st July ] ]"
)
ALARM_CS = "Muje [ 1 july tak ]_2 ke liye [ har thursday ko subah 5 baje ]_1 ka alarm set kare"


def _utt(parse_str, domain="x"):
    tree = parse_top(parse_str)
    return Utterance(domain, " ".join(tree.tokens), tree)


def test_alarm_row_swapped_order():
    u = _utt(ALARM_EN, "alarm")
    m = mark_utterance(u)
    assert m.text == "Set me an alarm [ every Thursday at 5AM ]_1 [ until the 1st July ]_2"
    expected = ParseTree(
        intent(
            "CREATE_ALARM",
            "Muje",
            slot("DATE_TIME", "1 july tak"),
            "ke liye",
            slot("DATE_TIME_RECURRING", "har thursday ko subah 5 baje"),
            "ka alarm set kare",
        )
    )
    assert reconstruct_parse(m, ALARM_CS) == expected


def test_identity_generation():
    u = _utt(ALARM_EN)
    m = mark_utterance(u)
    assert exact_match(reconstruct_parse(m, m.text), u.parse)


def test_nested_reconstruction():
    m = mark_utterance(_utt("[IN:A x [SL:B y [IN:C z ] ] ]"))
    tree = reconstruct_parse(m, "[ [ w ]_2 v ]_1 u")
    assert tree == ParseTree(intent("A", slot("B", intent("C", "w"), "v"), "u"))


def test_empty_reconstruction():
    m = mark_utterance(_utt("[IN:A x [SL:B y ] ]"))
    with pytest.raises(EmptyReconstruction):
        reconstruct_parse(m, "x [ ]_1")
    with pytest.raises(EmptyReconstruction):
        reconstruct_parse(mark_utterance(_utt("[IN:A x ]")), "")


def test_unfiltered_input_is_a_defect():
    m = mark_utterance(_utt("[IN:A x [SL:B y ] ]"))
    with pytest.raises(InternalInvariantViolation):
        reconstruct_parse(m, "x [ y ]_two")
    # nesting a slot in a slot only happens when the containment check is off
    m2 = mark_utterance(_utt("[IN:A [SL:B y ] [SL:C z ] ]"))
    assert validate_pair(m2, "[ y [ z ]_2 ]_1", containment=False).passed
    with pytest.raises(InternalInvariantViolation):
        reconstruct_parse(m2, "[ y [ z ]_2 ]_1")


def test_navigation_row_span_count():
    u = _utt(
        "[IN:GET_INFO_TRAFFIC What's the traffic like on [SL:LOCATION Long Island ] going to "
        "[SL:DESTINATION the Hamptons ] [SL:DATE_TIME tonight ] ]",
        "navigation",
    )
    m = mark_utterance(u)
    assert m.text == "What's the traffic like on [ Long Island ]_1 going to [ the Hamptons ]_2 [ tonight ]_3"
    cs = "[ Aaj raat ]_3 [ Hamptons ]_2 jaate hue [ Long Island ]_1 par traffic kaisa hoga"
    rec = align_one(u, cs, "human")
    assert rec.span_count == 3
    assert rec.cs_text == "Aaj raat Hamptons jaate hue Long Island par traffic kaisa hoga"
    assert str(rec.cs_parse) == (
        "[IN:GET_INFO_TRAFFIC [SL:DATE_TIME Aaj raat ] [SL:DESTINATION Hamptons ] jaate hue "
        "[SL:LOCATION Long Island ] par traffic kaisa hoga ]"
    )
    assert label_multiset(rec.cs_parse) == label_multiset(u.parse)


def _faithful(u):
    m = mark_utterance(u)
    return mock_generate(GenerationRequest(u.id, u.domain, m.text), HINGLISH_TABLE)


def test_align_corpus_faithful_identity():
    corpus = random_corpus(10, seed=3)
    items = [(u, mock_generate(GenerationRequest(u.id, u.domain, mark_utterance(u).text))) for u in corpus]
    aligned, rejects = align_corpus(items)
    assert rejects == []
    assert len(aligned) == 10
    assert all(exact_match(a.cs_parse, a.english.parse) for a in aligned)


def test_align_corpus_label_multisets():
    corpus = random_corpus(500, seed=4)
    aligned, rejects = align_corpus((u, _faithful(u)) for u in corpus)
    assert rejects == [] and len(aligned) == 500
    for a, u in zip(aligned, corpus):
        assert label_multiset(a.cs_parse) == label_multiset(u.parse)
        assert a.cs_parse.label == u.parse.label
        assert a.cs_parse.tokens == strip_marks(_faithful(u).candidate).split()
        assert a.tsv_row().count("\t") == 2


def test_align_corpus_routes_failures():
    u = _utt("[IN:A x [SL:B y ] ]")
    rec = mock_generate(GenerationRequest("7", "x", "x [ ]_1"))
    aligned, rejects = align_corpus([(u, rec)])
    assert aligned == []
    assert rejects[0].id == "7" and rejects[0].reason == "EmptyReconstruction"


def test_soundness_random_shuffles():
    # reorder top-level spans; containment is unchanged, so alignment must succeed
    rng = random.Random(5)
    for _ in range(500):
        u = random_utterance(rng)
        m = mark_utterance(u)
        cs = _shuffle_top_level(m.text, rng)
        if validate_pair(m, cs).passed:
            tree = reconstruct_parse(m, cs)
            assert label_multiset(tree) == label_multiset(u.parse)


def _shuffle_top_level(text, rng):
    units, depth, cur = [], 0, []
    for tok in text.split():
        cur.append(tok)
        if tok == "[":
            depth += 1
        elif tok.startswith("]_"):
            depth -= 1
        if depth == 0:
            units.append(cur)
            cur = []
    rng.shuffle(units)
    return " ".join(t for unit in units for t in unit)
