"""Hierarchical TOP parses: data model, parser, serializer and exact match.

Concrete syntax is the TOPv2 prefix form::

    [IN:CREATE_ALARM Set alarm [SL:DATE_TIME for 4:30 am ] ]

Trees are immutable; two trees are equal iff their canonical
serializations are equal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Sequence, Union


class TopError(ValueError):
    """Base class for malformed TOP strings and trees."""


class UnbalancedBrackets(TopError):
    pass


class UnknownNodePrefix(TopError):
    pass


class EmptyNode(TopError):
    pass


class RootNotIntent(TopError):
    pass


class SlotInsideSlot(TopError):
    pass


class IntentInsideIntent(TopError):
    pass


class InvalidToken(TopError):
    pass


class MisalignedParse(TopError):
    """The parse's tokens do not reproduce the utterance text."""


class NodeKind(str, enum.Enum):
    INTENT = "IN"
    SLOT = "SL"
    TOKEN = "TOK"


def check_token(text: str) -> None:
    """Raise InvalidToken unless ``text`` can appear as a plain leaf token."""
    if not text:
        raise InvalidToken("empty token")
    if any(ch.isspace() for ch in text):
        raise InvalidToken(f"token contains whitespace: {text!r}")
    if text.startswith("[") or text.startswith("]"):
        raise InvalidToken(f"token looks like a bracket: {text!r}")


def _check_label(label: str) -> None:
    if not label:
        raise UnknownNodePrefix("empty node label")
    if any(ch.isspace() for ch in label) or "[" in label or "]" in label:
        raise UnknownNodePrefix(f"bad node label: {label!r}")


@dataclass(frozen=True)
class ParseNode:
    kind: NodeKind
    label: str = ""
    text: str = ""
    children: tuple["ParseNode", ...] = field(default_factory=tuple)

    @property
    def is_token(self) -> bool:
        return self.kind is NodeKind.TOKEN

    def tokens(self) -> Iterator[str]:
        if self.is_token:
            yield self.text
            return
        for child in self.children:
            yield from child.tokens()

    def __str__(self) -> str:
        return " ".join(_emit(self))


Child = Union[ParseNode, str]


def token(text: str) -> ParseNode:
    check_token(text)
    return ParseNode(NodeKind.TOKEN, text=text)


def _as_children(children: Sequence[Child]) -> tuple[ParseNode, ...]:
    out = []
    for child in children:
        if isinstance(child, str):
            out.extend(token(t) for t in child.split())
        else:
            out.append(child)
    return tuple(out)


def intent(label: str, *children: Child) -> ParseNode:
    """Build an intent node; string children are split into tokens."""
    return ParseNode(NodeKind.INTENT, label=label, children=_as_children(children))


def slot(label: str, *children: Child) -> ParseNode:
    return ParseNode(NodeKind.SLOT, label=label, children=_as_children(children))


def _validate(node: ParseNode, parent: Optional[NodeKind]) -> None:
    if node.is_token:
        check_token(node.text)
        if node.children or node.label:
            raise TopError("token nodes carry neither label nor children")
        return
    _check_label(node.label)
    if not node.children:
        raise EmptyNode(f"{node.kind.value}:{node.label} has no children")
    if parent is NodeKind.SLOT and node.kind is NodeKind.SLOT:
        raise SlotInsideSlot(f"SL:{node.label} nested directly in a slot")
    if parent is NodeKind.INTENT and node.kind is NodeKind.INTENT:
        raise IntentInsideIntent(f"IN:{node.label} nested directly in an intent")
    for child in node.children:
        _validate(child, node.kind)


@dataclass(frozen=True)
class ParseTree:
    root: ParseNode

    def __post_init__(self) -> None:
        if self.root.kind is not NodeKind.INTENT:
            raise RootNotIntent("the root of a TOP tree must be an intent")
        _validate(self.root, None)

    @property
    def tokens(self) -> list[str]:
        return list(self.root.tokens())

    @property
    def label(self) -> str:
        return self.root.label

    def __str__(self) -> str:
        return serialize(self)


def _emit(node: ParseNode) -> Iterator[str]:
    # iterative, so deep random trees never hit the recursion limit
    stack: list[Union[ParseNode, str]] = [node]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            yield item
        elif item.is_token:
            yield item.text
        else:
            yield f"[{item.kind.value}:{item.label}"
            stack.append("]")
            stack.extend(reversed(item.children))


def serialize(tree: ParseTree) -> str:
    return " ".join(_emit(tree.root))


def parse_top(text: str) -> ParseTree:
    """Parse a bracketed TOP string.

    Labels are upper-cased. Raises a :class:`TopError` subclass describing
    the first problem found.
    """
    # each frame: (kind, label, children)
    stack: list[tuple[NodeKind, str, list[ParseNode]]] = []
    root: Optional[ParseNode] = None
    for tok in text.split():
        if root is not None:
            raise RootNotIntent(f"content after the root node closes: {tok!r}")
        if tok.startswith("["):
            prefix, _, label = tok[1:].partition(":")
            if prefix == "IN":
                kind = NodeKind.INTENT
            elif prefix == "SL":
                kind = NodeKind.SLOT
            else:
                raise UnknownNodePrefix(f"unknown node opener {tok!r}")
            _check_label(label)
            if not stack and kind is not NodeKind.INTENT:
                raise RootNotIntent(f"root opens with {tok!r}")
            if stack:
                parent_kind = stack[-1][0]
                if parent_kind is kind is NodeKind.SLOT:
                    raise SlotInsideSlot(f"{tok} nested directly in a slot")
                if parent_kind is kind is NodeKind.INTENT:
                    raise IntentInsideIntent(f"{tok} nested directly in an intent")
            stack.append((kind, label.upper(), []))
        elif tok == "]":
            if not stack:
                raise UnbalancedBrackets("closing bracket without an open node")
            kind, label, children = stack.pop()
            if not children:
                raise EmptyNode(f"{kind.value}:{label} has no children")
            node = ParseNode(kind, label=label, children=tuple(children))
            if stack:
                stack[-1][2].append(node)
            else:
                root = node
        else:
            if not stack:
                raise RootNotIntent(f"token {tok!r} outside the root intent")
            check_token(tok)
            stack[-1][2].append(ParseNode(NodeKind.TOKEN, text=tok))
    if stack:
        raise UnbalancedBrackets(f"{len(stack)} node(s) left open")
    if root is None:
        raise RootNotIntent("empty parse string")
    # nesting and emptiness were checked while parsing
    tree = object.__new__(ParseTree)
    object.__setattr__(tree, "root", root)
    return tree


def exact_match(a: ParseTree, b: ParseTree) -> bool:
    return serialize(a) == serialize(b)


class LeafNode(NamedTuple):
    path: tuple[int, ...]
    kind: NodeKind
    label: str
    start: int
    end: int


def leaf_nodes(tree: ParseTree) -> list[LeafNode]:
    """All non-root intent/slot nodes in pre-order with [start, end) token spans."""
    out: list[LeafNode] = []

    def visit(node: ParseNode, path: tuple[int, ...], offset: int) -> None:
        for i, child in enumerate(node.children):
            if child.is_token:
                offset += 1
                continue
            width = sum(1 for _ in child.tokens())
            out.append(LeafNode(path + (i,), child.kind, child.label, offset, offset + width))
            visit(child, path + (i,), offset)
            offset += width

    visit(tree.root, (), 0)
    return out


def node_at(tree: ParseTree, path: Sequence[int]) -> ParseNode:
    node = tree.root
    for i in path:
        node = node.children[i]
    return node


@dataclass(frozen=True)
class Utterance:
    domain: str
    text: str
    parse: Optional[ParseTree] = None
    split: str = "train"
    id: str = ""

    def check_aligned(self) -> None:
        if self.parse is not None and self.parse.tokens != self.text.split():
            raise MisalignedParse(
                f"parse tokens {' '.join(self.parse.tokens)!r} != utterance {self.text!r}"
            )

    @property
    def tokens(self) -> list[str]:
        return self.text.split()
