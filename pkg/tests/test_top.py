import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csaug.synthetic import random_tree
from csaug.top import (
    EmptyNode,
    IntentInsideIntent,
    InvalidToken,
    NodeKind,
    ParseTree,
    RootNotIntent,
    SlotInsideSlot,
    UnbalancedBrackets,
    UnknownNodePrefix,
    exact_match,
    intent,
    leaf_nodes,
    parse_top,
    serialize,
    slot,
)

ALARM = (
    "[IN:CREATE_ALARM Set alarm [SL:DATE_TIME for 4:30 am on Tuesday ] and "
    "[SL:DATE_TIME Thursday ] of next week ]"
)
NESTED = "[IN:A x [SL:B y [IN:C z ] ] ]"


def oracle_serialize(node) -> str:
    """Recursive reference serializer, independent of the library's emitter."""
    if node.kind is NodeKind.TOKEN:
        return node.text
    inner = " ".join(oracle_serialize(c) for c in node.children)
    return f"[{node.kind.value}:{node.label} {inner} ]"


def test_parse_alarm_example():
    tree = parse_top(ALARM)
    expected = intent(
        "CREATE_ALARM",
        "Set alarm",
        slot("DATE_TIME", "for 4:30 am on Tuesday"),
        "and",
        slot("DATE_TIME", "Thursday"),
        "of next week",
    )
    assert tree.root == expected
    assert serialize(tree) == ALARM


def test_minimal_tree():
    tree = parse_top("[IN:GET_WEATHER hello ]")
    assert tree.root == intent("GET_WEATHER", "hello")
    assert serialize(tree) == "[IN:GET_WEATHER hello ]"


def test_whitespace_canonicalized():
    assert serialize(parse_top("  [IN:A\tx   [SL:B  y ]\n ]")) == "[IN:A x [SL:B y ] ]"


def test_labels_upper_cased():
    assert serialize(parse_top("[IN:get_weather [SL:location x ] ]")) == "[IN:GET_WEATHER [SL:LOCATION x ] ]"


@pytest.mark.parametrize(
    "text, error",
    [
        ("[IN:A [SL:B [SL:C x ] ] ]", SlotInsideSlot),
        ("[IN:A [IN:B x ] ]", IntentInsideIntent),
        ("[IN:A x", UnbalancedBrackets),
        ("[IN:A x ] ]", RootNotIntent),
        ("] x", UnbalancedBrackets),
        ("[IN:A [XX:B x ] ]", UnknownNodePrefix),
        ("[IN:A [ x ] ]", UnknownNodePrefix),
        ("[IN:A [SL:B ] ]", EmptyNode),
        ("[IN:A ]", EmptyNode),
        ("[SL:A x ]", RootNotIntent),
        ("hello [IN:A x ]", RootNotIntent),
        ("[IN:A x ] [IN:B y ]", RootNotIntent),
        ("", RootNotIntent),
        ("[IN: x ]", UnknownNodePrefix),
        ("[IN:A x ]_1 ]", InvalidToken),
    ],
)
def test_parse_errors(text, error):
    with pytest.raises(error):
        parse_top(text)


def test_tree_constructor_validates():
    with pytest.raises(RootNotIntent):
        ParseTree(slot("A", "x"))
    with pytest.raises(SlotInsideSlot):
        ParseTree(intent("A", slot("B", slot("C", "x"))))
    with pytest.raises(EmptyNode):
        ParseTree(intent("A", slot("B")))
    with pytest.raises(InvalidToken):
        intent("A", "[oops")


def test_random_round_trip():
    rng = random.Random(7)
    for _ in range(1000):
        tree = random_tree(rng)
        text = serialize(tree)
        assert text == oracle_serialize(tree.root)
        assert parse_top(text) == tree


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_canonical_idempotence(seed):
    tree = random_tree(random.Random(seed))
    messy = "  ".join(serialize(tree).split(" "))
    once = serialize(parse_top(messy))
    assert once == serialize(parse_top(once))


def test_exact_match():
    t = parse_top(ALARM)
    assert exact_match(t, t)
    relabeled = parse_top(ALARM.replace("[SL:DATE_TIME Thursday", "[SL:ALARM_NAME Thursday"))
    assert not exact_match(t, relabeled)


def test_exact_match_sibling_order_matters():
    a = parse_top("[IN:X [SL:A p ] [SL:B q ] ]")
    b = parse_top("[IN:X [SL:B q ] [SL:A p ] ]")
    # same node multiset, different order: the strings differ, so no match
    assert sorted(serialize(a).split()) == sorted(serialize(b).split())
    assert serialize(a) != serialize(b)
    assert not exact_match(a, b)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_exact_match_is_string_equality(s1, s2):
    a, b = random_tree(random.Random(s1), 2), random_tree(random.Random(s2), 2)
    assert exact_match(a, b) == (serialize(a) == serialize(b))
    assert exact_match(a, a) and exact_match(b, b)
    assert exact_match(a, b) == exact_match(b, a)


def test_leaf_nodes_alarm():
    # hand enumeration: Set0 alarm1 [for2 4:30 3 am4 on5 Tuesday6] and7 [Thursday8] of9 next10 week11
    leaves = leaf_nodes(parse_top(ALARM))
    assert [(l.path, l.kind, l.label, l.start, l.end) for l in leaves] == [
        ((2,), NodeKind.SLOT, "DATE_TIME", 2, 7),
        ((4,), NodeKind.SLOT, "DATE_TIME", 8, 9),
    ]


def test_leaf_nodes_flat_and_nested():
    assert leaf_nodes(parse_top("[IN:GET_WEATHER hello there ]")) == []
    leaves = leaf_nodes(parse_top(NESTED))
    assert [(l.path, l.kind, l.label, l.start, l.end) for l in leaves] == [
        ((1,), NodeKind.SLOT, "B", 1, 3),
        ((1, 1), NodeKind.INTENT, "C", 2, 3),
    ]


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_leaf_span_nesting(seed):
    tree = random_tree(random.Random(seed))
    n = len(tree.tokens)
    leaves = leaf_nodes(tree)
    for leaf in leaves:
        assert 0 <= leaf.start < leaf.end <= n
    by_path = {l.path: l for l in leaves}
    for leaf in leaves:
        parent = by_path.get(leaf.path[:-1])
        if parent is not None:
            # a slot wrapping only an intent covers the same tokens, so not strict
            assert parent.start <= leaf.start and leaf.end <= parent.end
    siblings: dict = {}
    for leaf in leaves:
        siblings.setdefault(leaf.path[:-1], []).append(leaf)
    for group in siblings.values():
        for a, b in zip(group, group[1:]):
            assert a.end <= b.start
