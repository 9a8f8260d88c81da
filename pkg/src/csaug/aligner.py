"""Transfer an English parse onto a marked code-switched utterance.

Span ``k`` in the code-switched text takes the kind and label of English
node ``k``; the root copies the English root intent. Tokens attach to the
innermost enclosing span, or to the root. Sibling order is the
code-switched surface order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .genclient import GenerationRecord
from .marker import MarkedUtterance, mark_utterance
from .spanfilter import OPEN, CLOSE_RE, extract_spans
from .top import NodeKind, ParseNode, ParseTree, TopError, Utterance, leaf_nodes, serialize


class AlignmentError(ValueError):
    pass


class EmptyReconstruction(AlignmentError):
    pass


class InternalInvariantViolation(AlignmentError):
    """The candidate passed the filter but still cannot be aligned."""


def reconstruct_parse(english: MarkedUtterance, cs: str) -> ParseTree:
    spans = extract_spans(cs)
    if not spans.ok:
        raise InternalInvariantViolation(f"candidate is not structurally valid: {cs!r}")
    if not spans.plain_tokens:
        raise EmptyReconstruction("code-switched utterance has no tokens")
    frames: list[list[ParseNode]] = [[]]
    for tok in cs.split():
        if tok == OPEN:
            frames.append([])
            continue
        m = CLOSE_RE.fullmatch(tok)
        if m is None:
            frames[-1].append(ParseNode(NodeKind.TOKEN, text=tok))
            continue
        span_id = int(m.group(1))
        children = frames.pop()
        if span_id not in english.span_map:
            raise InternalInvariantViolation(f"span id {span_id} absent from the English input")
        info = english.span_map[span_id]
        if not children:
            raise EmptyReconstruction(f"span {span_id} ({info.label}) is empty")
        frames[-1].append(ParseNode(info.kind, label=info.label, children=tuple(children)))
    try:
        return ParseTree(ParseNode(NodeKind.INTENT, label=english.root_label, children=tuple(frames[0])))
    except TopError as exc:
        raise InternalInvariantViolation(str(exc)) from exc


@dataclass(frozen=True)
class AlignedRecord:
    english: Utterance
    cs_text: str
    cs_parse: ParseTree
    provenance: str  # "human" | "generated"
    span_count: int
    id: str = ""

    def tsv_row(self) -> str:
        return f"{self.english.domain}\t{self.cs_text}\t{serialize(self.cs_parse)}\n"


def label_multiset(tree: ParseTree) -> Counter:
    return Counter((n.kind, n.label) for n in leaf_nodes(tree))


def align_one(english: Utterance, cs: str, provenance: str = "generated", id: str = "") -> AlignedRecord:
    marked = mark_utterance(english)
    tree = reconstruct_parse(marked, cs)
    cs_text = " ".join(extract_spans(cs).plain_tokens)
    return AlignedRecord(english, cs_text, tree, provenance, len(marked.span_map), id)


@dataclass
class AlignReject:
    id: str
    candidate: str
    reason: str
    message: str

    def to_json(self) -> dict:
        return {"id": self.id, "candidate": self.candidate, "violations": [self.reason], "message": self.message}


def align_corpus(
    items: Iterable[tuple[Utterance, GenerationRecord]],
    provenance: str = "generated",
) -> tuple[list[AlignedRecord], list[AlignReject]]:
    """Align filter-accepted records; failures go to the rejects list in input order."""
    aligned, rejects = [], []
    for english, record in items:
        try:
            aligned.append(align_one(english, record.candidate or "", provenance, record.request.id))
        except AlignmentError as exc:
            rejects.append(AlignReject(record.request.id, record.candidate or "", type(exc).__name__, str(exc)))
    return aligned, rejects


def augmented_tsv(records: Sequence[AlignedRecord], header: Optional[str] = None) -> str:
    head = f"{header}\n" if header else ""
    return head + "".join(r.tsv_row() for r in records)
