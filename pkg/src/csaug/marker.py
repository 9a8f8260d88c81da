"""Span-ID marking of labeled utterances and seed-pair export.

Every non-root intent or slot node gets a bracket pair, numbered 1..n in
pre-order::

    Set alarm [ for 4:30 am on Tuesday ]_1 and [ Thursday ]_2 of next week

On depth-1 trees this is plain slot marking; nested intents and their
slots are marked recursively.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .spanfilter import OPEN, StructuralError, extract_spans, validate_pair
from .top import NodeKind, ParseNode, Utterance


class SpanInfo(NamedTuple):
    path: tuple[int, ...]
    kind: NodeKind
    label: str


@dataclass(frozen=True)
class MarkedUtterance:
    tokens: tuple[str, ...]
    span_map: dict[int, SpanInfo]
    root_label: str

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def __str__(self) -> str:
        return self.text


def close_token(span_id: int) -> str:
    return f"]_{span_id}"


def mark_utterance(u: Utterance) -> MarkedUtterance:
    if u.parse is None:
        raise ValueError("cannot mark an utterance without a parse")
    u.check_aligned()
    out: list[str] = []
    span_map: dict[int, SpanInfo] = {}

    def visit(node: ParseNode, path: tuple[int, ...]) -> None:
        for i, child in enumerate(node.children):
            if child.is_token:
                out.append(child.text)
                continue
            span_id = len(span_map) + 1
            span_map[span_id] = SpanInfo(path + (i,), child.kind, child.label)
            out.append(OPEN)
            visit(child, path + (i,))
            out.append(close_token(span_id))

    visit(u.parse.root, ())
    return MarkedUtterance(tuple(out), span_map, u.parse.label)


def strip_marks(marked: str) -> str:
    spans = extract_spans(marked)
    if not spans.ok:
        raise StructuralError(spans.violations, marked)
    return " ".join(spans.plain_tokens)


class SeedError(ValueError):
    pass


class SizeTooLarge(SeedError):
    pass


class InvalidPair(SeedError):
    def __init__(self, failures: list[tuple[int, str, list[str]]]):
        self.failures = failures
        lines = [f"  #{i}: {', '.join(v)} :: {cs}" for i, cs, v in failures[:10]]
        more = f"\n  ... {len(failures) - 10} more" if len(failures) > 10 else ""
        super().__init__(
            f"{len(failures)} seed pair(s) fail the span filter:\n" + "\n".join(lines) + more
        )


@dataclass(frozen=True)
class SeedPair:
    input: MarkedUtterance
    target: str
    domain: str


def apportion_order(counts: dict[str, int]) -> list[str]:
    """Order in which strata receive seats as the sample size grows.

    Uses the Balinski-Young quota method: the first ``n`` entries allocate
    ``n`` seats so that every stratum gets the floor or ceiling of its
    proportional share, and growing ``n`` never takes a seat away.
    """
    total = sum(counts.values())
    seats = {d: 0 for d in counts}
    order: list[str] = []
    for house in range(1, total + 1):
        best, best_key = None, None
        for d in sorted(counts):
            n_d = counts[d]
            # upper quota: seats[d] + 1 <= ceil(house * n_d / total)
            if seats[d] >= n_d or seats[d] * total >= house * n_d:
                continue
            key = Fraction(n_d, seats[d] + 1)
            if best_key is None or key > best_key:
                best, best_key = d, key
        assert best is not None
        seats[best] += 1
        order.append(best)
    return order


def stratified_order(domains: Sequence[str], rng_seed: int) -> list[int]:
    """A permutation of indices whose every prefix is a domain-stratified sample."""
    by_domain: dict[str, list[int]] = {}
    for i, d in enumerate(domains):
        by_domain.setdefault(d, []).append(i)
    for d, idx in by_domain.items():
        random.Random(f"{rng_seed}:{d}").shuffle(idx)
    taken = {d: 0 for d in by_domain}
    order = []
    for d in apportion_order({d: len(v) for d, v in by_domain.items()}):
        order.append(by_domain[d][taken[d]])
        taken[d] += 1
    return order


def sample_nested(domains: Sequence[str], sizes: Iterable[int], rng_seed: int) -> dict[int, list[int]]:
    """Nested stratified samples, each returned as sorted input indices."""
    sizes = list(sizes)
    for n in sizes:
        if n > len(domains):
            raise SizeTooLarge(f"seed size {n} exceeds corpus size {len(domains)}")
        if n < 0:
            raise SeedError(f"negative seed size {n}")
    order = stratified_order(domains, rng_seed)
    return {n: sorted(order[:n]) for n in sizes}


def build_seed_pairs(corpus: Sequence[tuple[Utterance, str]]) -> list[SeedPair]:
    """Mark every English side and check each pair; raises InvalidPair listing all failures."""
    pairs, failures = [], []
    for i, (u, cs) in enumerate(corpus):
        m = mark_utterance(u)
        verdict = validate_pair(m, cs)
        if verdict.passed:
            pairs.append(SeedPair(m, " ".join(cs.split()), u.domain))
        else:
            failures.append((i, cs, [v.value for v in verdict.violations]))
    if failures:
        raise InvalidPair(failures)
    return pairs


def seed_tsv(pairs: Sequence[SeedPair]) -> str:
    return "".join(f"{p.input.text}\t{p.target}\t{p.domain}\n" for p in pairs)


def export_seed_pairs(
    corpus: Sequence[tuple[Utterance, str]],
    size: int,
    path: str | Path,
    rng_seed: int = 0,
) -> list[SeedPair]:
    """Write a stratified sample of ``size`` seed pairs as TSV, in input order."""
    if size > len(corpus):
        raise SizeTooLarge(f"seed size {size} exceeds corpus size {len(corpus)}")
    pairs = build_seed_pairs(corpus)
    chosen = sample_nested([p.domain for p in pairs], [size], rng_seed)[size]
    sample = [pairs[i] for i in chosen]
    Path(path).write_text(seed_tsv(sample), encoding="utf-8")
    return sample
