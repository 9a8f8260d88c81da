"""Syntactic filter for generated code-switched utterances.

A marked utterance carries numbered spans: a standalone ``[`` token opens a
span and a fused ``]_k`` token closes it, ``k`` a positive base-10 integer.
A generated candidate is kept only if its spans can be put in 1:1
correspondence with the spans of the English input.
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Optional, Sequence, Union

if TYPE_CHECKING:
    from .genclient import GenerationRecord
    from .marker import MarkedUtterance

OPEN = "["
CLOSE_RE = re.compile(r"\]_([1-9][0-9]*)")


class Rule(str, enum.Enum):
    UNBALANCED_BRACKETS = "UnbalancedBrackets"
    MALFORMED_SPAN_ID = "MalformedSpanId"
    MISMATCHED_SPAN_IDS = "MismatchedSpanIds"
    UNEQUAL_SPAN_COUNT = "UnequalSpanCount"
    MISMATCHED_CONTAINMENT = "MismatchedContainment"


# Attribution order. Identifier mismatch is checked before the span count so
# that a candidate with foreign ids is attributed to the id rule even when it
# also drops spans.
CHECK_ORDER = (
    Rule.UNBALANCED_BRACKETS,
    Rule.MALFORMED_SPAN_ID,
    Rule.MISMATCHED_SPAN_IDS,
    Rule.UNEQUAL_SPAN_COUNT,
    Rule.MISMATCHED_CONTAINMENT,
)


class StructuralError(ValueError):
    def __init__(self, violations: Sequence[Rule], text: str = ""):
        self.violations = tuple(violations)
        names = ", ".join(v.value for v in self.violations)
        super().__init__(f"structurally invalid marked text ({names}): {text!r}")


@dataclass(frozen=True)
class Span:
    id: int
    depth: int
    parent: Optional[int]  # None for spans directly under the root
    start: int  # offsets into plain_tokens, [start, end)
    end: int


@dataclass(frozen=True)
class SpanSet:
    spans: tuple[Span, ...] = ()
    plain_tokens: tuple[str, ...] = ()
    violations: tuple[Rule, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def ids(self) -> list[int]:
        return [s.id for s in self.spans]

    def parents(self) -> dict[int, Optional[int]]:
        return {s.id: s.parent for s in self.spans}


def extract_spans(text: str) -> SpanSet:
    """Scan a marked utterance; problems are reported in ``violations``.

    Spans are listed in order of their opening bracket. A close token whose
    id cannot be read still closes a span, so a lone ``]_two`` is reported
    as a formatting problem rather than an imbalance.
    """
    violations: set[Rule] = set()
    plain: list[str] = []
    # open frames: [index into spans, start offset]
    stack: list[list[int]] = []
    pending: list[Optional[Span]] = []
    for tok in text.split():
        if tok == OPEN:
            stack.append([len(pending), len(plain)])
            pending.append(None)
        elif tok.startswith("]"):
            m = CLOSE_RE.fullmatch(tok)
            if m is None:
                violations.add(Rule.MALFORMED_SPAN_ID)
            if not stack:
                violations.add(Rule.UNBALANCED_BRACKETS)
                continue
            index, start = stack.pop()
            if m is not None:
                parent_index = stack[-1][0] if stack else None
                pending[index] = Span(
                    id=int(m.group(1)),
                    depth=len(stack),
                    parent=parent_index,  # resolved to an id below
                    start=start,
                    end=len(plain),
                )
        elif tok.startswith("["):
            # an opener fused with text, e.g. "[mujhe"
            violations.add(Rule.MALFORMED_SPAN_ID)
        else:
            plain.append(tok)
    if stack:
        violations.add(Rule.UNBALANCED_BRACKETS)
    if violations:
        ordered = tuple(r for r in CHECK_ORDER if r in violations)
        return SpanSet((), tuple(plain), ordered)
    spans = []
    for s in pending:
        assert s is not None
        parent = pending[s.parent].id if s.parent is not None else None  # type: ignore[union-attr]
        spans.append(Span(s.id, s.depth, parent, s.start, s.end))
    return SpanSet(tuple(spans), tuple(plain), ())


@dataclass(frozen=True)
class ValidationVerdict:
    violations: tuple[Rule, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def primary(self) -> Optional[Rule]:
        return self.violations[0] if self.violations else None

    def to_json(self) -> dict:
        return {"pass": self.passed, "violations": [v.value for v in self.violations]}


def _english_spans(english: Union["MarkedUtterance", str, SpanSet]) -> SpanSet:
    if isinstance(english, SpanSet):
        spans = english
    else:
        spans = extract_spans(english if isinstance(english, str) else english.text)
    if not spans.ok:
        raise StructuralError(spans.violations, "english side")
    return spans


def validate_pair(
    english: Union["MarkedUtterance", str, SpanSet],
    cs: str,
    containment: bool = True,
) -> ValidationVerdict:
    """Check a code-switched candidate against its English marked input.

    Structural problems abort the remaining checks. Otherwise every
    applicable rule is evaluated and reported in attribution order.
    ``containment=False`` skips the nesting check.
    """
    en = _english_spans(english)
    got = extract_spans(cs)
    if not got.ok:
        return ValidationVerdict(got.violations)
    found: list[Rule] = []
    en_ids, cs_ids = Counter(en.ids), Counter(got.ids)
    if set(en_ids) != set(cs_ids):
        found.append(Rule.MISMATCHED_SPAN_IDS)
    # a repeated id counts here even when the totals happen to agree
    duplicated = any(n > en_ids[k] for k, n in cs_ids.items() if k in en_ids)
    if len(en.spans) != len(got.spans) or duplicated:
        found.append(Rule.UNEQUAL_SPAN_COUNT)
    if containment and not found and en.parents() != got.parents():
        found.append(Rule.MISMATCHED_CONTAINMENT)
    return ValidationVerdict(tuple(found))


@dataclass
class ThroughputReport:
    total: int = 0
    accepted: int = 0
    rejected_by_rule: dict[str, int] = field(
        default_factory=lambda: {r.value: 0 for r in CHECK_ORDER}
    )

    @property
    def rejected(self) -> int:
        return sum(self.rejected_by_rule.values())

    @property
    def throughput(self) -> float:
        return self.accepted / self.total if self.total else 0.0

    @property
    def percent(self) -> str:
        return f"{100 * self.throughput:.1f}%"

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "rejected_by_rule": dict(self.rejected_by_rule),
            "throughput": self.throughput,
            "throughput_percent": self.percent,
        }

    def render(self) -> str:
        rows = [("Input queries", str(self.total)), ("Accepted", str(self.accepted))]
        rows += [(f"Rejected: {rule}", str(n)) for rule, n in self.rejected_by_rule.items()]
        rows.append(("Throughput", self.percent))
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value:>8}" for name, value in rows)


@dataclass
class FilterResult:
    accepted: list
    rejected: list  # (record, verdict) pairs
    report: ThroughputReport


def filter_corpus(
    records: Iterable["GenerationRecord"],
    containment: bool = True,
) -> FilterResult:
    """Partition generation records into accepted and rejected.

    Each rejection is counted once, under its first violated rule.
    Records that failed generation must be removed beforehand.
    """
    accepted, rejected = [], []
    report = ThroughputReport()
    for record in records:
        if record.candidate is None:
            raise ValueError(f"record {record.request.id} has no candidate ({record.error})")
        verdict = validate_pair(record.request.marked_text, record.candidate, containment)
        report.total += 1
        if verdict.passed:
            accepted.append(record)
            report.accepted += 1
        else:
            rejected.append((record, verdict))
            report.rejected_by_rule[verdict.primary.value] += 1
    return FilterResult(accepted, rejected, report)
