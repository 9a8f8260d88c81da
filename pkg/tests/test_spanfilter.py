import pytest

from csaug.genclient import GenerationRecord, GenerationRequest, mock_generate
from csaug.spanfilter import (
    Rule,
    StructuralError,
    ThroughputReport,
    extract_spans,
    filter_corpus,
    validate_pair,
)

# error examples from the generator output study, one per filter rule
TABLE4 = [
    (
        "[ 9 pm ]_1 [ appointment for photos ]_2 and remind [ me ]_3 [ an hour before ]_4",
        "[ mujhe ]_3 [ 9 pm ]_1 ko [ photos ke liye appointment ]_2 hai aur [ mujhe ]_3 [ ek ghante pehle ]_4 yaad dilaayen",
        Rule.UNEQUAL_SPAN_COUNT,
    ),
    (
        "play [ song ]_1 [ Heart is on fire ]_2 on [ spotify ]_3",
        "[ spotify ]_3 par [ song ]_1 [ Heart is on fire ]_two ko bajao",
        Rule.MALFORMED_SPAN_ID,
    ),
    (
        "Change [ banking ]_1 reminders [ from ]_2 [ once a week ]_3 [ to ]_4 [ twice a week ]_5",
        "[ banking ]_1 reminders ko [ [ ek bar har week ]_3 [ dohrayen ]_4",
        Rule.UNBALANCED_BRACKETS,
    ),
    (
        "Remind [ me ]_1 to [ email ]_2 [ Michelle ]_3 [ on Tuesday ]_4 [ about ]_5 [ the recital ]_6",
        "[ Mujhe ]_1 [ Tuesday ko ]_7 [ Michelle ]_3 ko [ email ]_2 karne ke liye yaad dilaayen",
        Rule.MISMATCHED_SPAN_IDS,
    ),
]


def test_extract_simple():
    s = extract_spans("a [ b ]_1 c")
    assert s.ok
    assert s.plain_tokens == ("a", "b", "c")
    assert [(x.id, x.depth, x.parent, x.start, x.end) for x in s.spans] == [(1, 0, None, 1, 2)]


def test_extract_nested_order_of_opening():
    s = extract_spans("[ [ w ]_2 v ]_1 u")
    assert [(x.id, x.depth, x.parent, x.start, x.end) for x in s.spans] == [
        (1, 0, None, 0, 2),
        (2, 1, 1, 0, 1),
    ]


@pytest.mark.parametrize(
    "text, rules",
    [
        ("[ spotify ]_3 par [ song ]_1 [ Heart is on fire ]_two ko bajao", (Rule.MALFORMED_SPAN_ID,)),
        ("[ banking ]_1 reminders ko [ [ ek bar har week ]_3 [ dohrayen ]_4", (Rule.UNBALANCED_BRACKETS,)),
        ("a ]_1", (Rule.UNBALANCED_BRACKETS,)),
        ("[ a ]_0", (Rule.MALFORMED_SPAN_ID,)),
        ("[ a ]_01", (Rule.MALFORMED_SPAN_ID,)),
        ("[ a ]", (Rule.MALFORMED_SPAN_ID,)),
        ("[a ]_1", (Rule.UNBALANCED_BRACKETS, Rule.MALFORMED_SPAN_ID)),
        ("[ a ]_x ]_1", (Rule.UNBALANCED_BRACKETS, Rule.MALFORMED_SPAN_ID)),
        ("", ()),
    ],
)
def test_extract_violations(text, rules):
    assert extract_spans(text).violations == rules


@pytest.mark.parametrize("english, cs, rule", TABLE4)
def test_table4_rows(english, cs, rule):
    verdict = validate_pair(english, cs)
    assert not verdict.passed
    assert verdict.primary is rule


def test_table4_exact_violation_sets():
    got = [validate_pair(en, cs).violations for en, cs, _ in TABLE4]
    assert got[0] == (Rule.UNEQUAL_SPAN_COUNT,)
    assert got[1] == (Rule.MALFORMED_SPAN_ID,)
    assert got[2] == (Rule.UNBALANCED_BRACKETS,)
    # the fourth example also drops spans 4-6, so the count rule fires after the id rule
    assert got[3] == (Rule.MISMATCHED_SPAN_IDS, Rule.UNEQUAL_SPAN_COUNT)


def test_validate_self_pair_and_reorder():
    en = "Set me an alarm [ every Thursday at 5AM ]_1 [ until the 1st July ]_2"
    assert validate_pair(en, en).passed
    cs = "Muje [ 1 july tak ]_2 ke liye [ har thursday ko subah 5 baje ]_1 ka alarm set kare"
    assert validate_pair(en, cs).passed


def test_containment():
    en = "x [ y [ z ]_2 ]_1"
    assert validate_pair(en, "[ [ w ]_2 v ]_1 u").passed
    flat = "[ w ]_2 [ v ]_1"
    assert validate_pair(en, flat).violations == (Rule.MISMATCHED_CONTAINMENT,)
    assert validate_pair(en, flat, containment=False).passed
    inverted = "[ [ w ]_1 v ]_2"
    assert validate_pair(en, inverted).violations == (Rule.MISMATCHED_CONTAINMENT,)


def test_empty_candidate():
    assert validate_pair("a [ b ]_1", "").violations == (Rule.MISMATCHED_SPAN_IDS, Rule.UNEQUAL_SPAN_COUNT)
    assert validate_pair("a b", "").passed


def test_dropped_span_is_rejected():
    assert validate_pair("[ a ]_1 [ b ]_2", "[ a ]_1 b").violations == (
        Rule.MISMATCHED_SPAN_IDS,
        Rule.UNEQUAL_SPAN_COUNT,
    )


def test_english_side_must_be_wellformed():
    with pytest.raises(StructuralError):
        validate_pair("[ a ]_x", "a")


def _record(i, english, mode):
    return mock_generate(GenerationRequest(str(i), "d", english), {}, mode)


def test_filter_corpus_mixture():
    en = "play [ song ]_1 [ Heart is on fire ]_2 on [ spotify ]_3"
    records = [_record(i, en, "faithful") for i in range(50)] + [_record(i, en, "corrupt-R2") for i in range(50, 100)]
    result = filter_corpus(records)
    assert result.report.total == 100
    assert result.report.accepted == 50
    assert result.report.throughput == 0.5
    assert result.report.rejected_by_rule[Rule.MALFORMED_SPAN_ID.value] == 50
    assert result.report.rejected == 50
    assert [r.request.id for r in result.accepted] == [str(i) for i in range(50)]


def test_filter_corpus_empty():
    result = filter_corpus([])
    assert result.accepted == [] and result.rejected == []
    assert result.report.total == 0 and result.report.throughput == 0.0


def test_filter_rejects_failed_generation():
    rec = GenerationRecord(GenerationRequest("1", "d", "a"), None, "", "MissingResponse")
    with pytest.raises(ValueError):
        filter_corpus([rec])


def test_throughput_rendering():
    report = ThroughputReport(total=100, accepted=82)
    report.rejected_by_rule[Rule.UNBALANCED_BRACKETS.value] = 18
    assert report.percent == "82.0%"
    assert "82.0%" in report.render()
    assert report.to_json()["throughput"] == 0.82
