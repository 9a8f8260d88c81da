"""Corpus I/O, configuration, the end-to-end augment run, seed splits and
exact-match evaluation."""

from __future__ import annotations

import dataclasses
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Optional, Sequence, Union

import yaml

from . import genclient
from .aligner import align_corpus, augmented_tsv
from .genclient import BackendConfig, GenerationRecord, GenerationRequest, generate_batch, make_backend
from .marker import build_seed_pairs, mark_utterance, sample_nested, seed_tsv, SizeTooLarge
from .spanfilter import filter_corpus
from .stats import LexiconTagger, corpus_stats, load_lexicon, write_report
from .top import TopError, Utterance, exact_match, parse_top

logger = logging.getLogger(__name__)

TSV_HEADER = "domain\tutterance\tsemantic_parse"
DEFAULT_SEED_SIZES = (100, 500, 1000, 2000, 3000)


class DataError(Exception):
    pass


class FileUnreadable(DataError):
    pass


class ColumnCountMismatch(DataError):
    def __init__(self, path, line: int, found: int, expected: int):
        self.line = line
        super().__init__(f"{path}:{line}: expected {expected} tab-separated columns, found {found}")


class KeyMismatch(DataError):
    pass


class UnparseableGold(DataError):
    pass


class ConfigError(ValueError):
    pass


# --- ingestion ---------------------------------------------------------------


@dataclass(frozen=True)
class IngestReject:
    line: int
    reason: str
    message: str
    raw: str

    def to_json(self) -> dict:
        return {"line": self.line, "reason": self.reason, "message": self.message, "raw": self.raw}


def _rows(path: Union[str, Path], header: bool, columns: int) -> Iterator[tuple[int, list[str]]]:
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if lineno == 1 and header:
                continue
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != columns:
                raise ColumnCountMismatch(path, lineno, len(cols), columns)
            yield lineno, cols


def iter_corpus(
    path: Union[str, Path],
    header: bool = True,
    split: str = "train",
    dedup: bool = False,
) -> Iterator[Union[Utterance, IngestReject]]:
    """Stream a ``domain<TAB>utterance<TAB>semantic_parse`` file.

    Yields an Utterance per good row (``id`` is its line number) and an
    IngestReject per row whose parse is invalid or does not match the text.
    """
    seen: set[tuple[str, str, str]] = set()
    for lineno, (domain, text, parse_str) in _rows(path, header, 3):
        if dedup:
            key = (domain, " ".join(text.split()), " ".join(parse_str.split()))
            if key in seen:
                continue
            seen.add(key)
        try:
            u = Utterance(domain, " ".join(text.split()), parse_top(parse_str), split, str(lineno))
            u.check_aligned()
        except TopError as exc:
            yield IngestReject(lineno, type(exc).__name__, str(exc), f"{domain}\t{text}\t{parse_str}")
            continue
        yield u


@dataclass
class Corpus:
    utterances: list[Utterance] = field(default_factory=list)
    rejects: list[IngestReject] = field(default_factory=list)


def ingest(path: Union[str, Path], header: bool = True, split: str = "train", dedup: bool = False) -> Corpus:
    corpus = Corpus()
    for item in iter_corpus(path, header, split, dedup):
        (corpus.rejects if isinstance(item, IngestReject) else corpus.utterances).append(item)
    return corpus


def read_pairs(path: Union[str, Path], header: bool = True) -> list[tuple[Utterance, str]]:
    """Read ``domain<TAB>utterance<TAB>semantic_parse<TAB>cs_marked`` annotation rows."""
    pairs = []
    for lineno, (domain, text, parse_str, cs) in _rows(path, header, 4):
        try:
            u = Utterance(domain, " ".join(text.split()), parse_top(parse_str), "train", str(lineno))
            u.check_aligned()
        except TopError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        pairs.append((u, cs))
    return pairs


def write_json(path: Union[str, Path], obj: Any) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


# --- configuration -------------------------------------------------------------


@dataclass
class Paths:
    corpus_in: str = ""
    out_dir: str = "augment_out"
    pairs_in: str = ""
    lexicon_a: str = ""
    lexicon_b: str = ""
    rejects_dir: str = ""


@dataclass
class Flags:
    header: bool = True
    dedup: bool = False
    strict_containment: bool = True


@dataclass
class PipelineConfig:
    paths: Paths = field(default_factory=Paths)
    backend: BackendConfig = field(default_factory=BackendConfig)
    rng_seed: int = 13
    seed_sizes: list[int] = field(default_factory=lambda: list(DEFAULT_SEED_SIZES))
    flags: Flags = field(default_factory=Flags)
    split: str = "train"

    def __post_init__(self) -> None:
        sizes = list(self.seed_sizes)
        if any(b <= a for a, b in zip(sizes, sizes[1:])) or any(s <= 0 for s in sizes):
            raise ConfigError(f"seed_sizes must be positive and strictly increasing: {sizes}")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data or {})
        sections = {"paths": Paths, "backend": BackendConfig, "flags": Flags}
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key in sections:
                known = {f.name for f in dataclasses.fields(sections[key])}
                unknown = set(value or {}) - known
                if unknown:
                    raise ConfigError(f"unknown {key} keys: {sorted(unknown)}")
                kwargs[key] = sections[key](**(value or {}))
            elif key in ("rng_seed", "seed_sizes", "split"):
                kwargs[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PipelineConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        # YAML is a superset of JSON, so one loader handles both
        return cls.from_dict(yaml.safe_load(text) or {})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# --- augment ---------------------------------------------------------------------


@dataclass
class AugmentSummary:
    inputs: int
    ingest_rejects: int
    generation_failures: int
    filter_rejects: int
    align_rejects: int
    aligned: int
    throughput: dict
    stats: Optional[dict] = None

    @property
    def conserved(self) -> bool:
        return self.inputs == self.aligned + self.filter_rejects + self.align_rejects + self.generation_failures

    def to_json(self) -> dict:
        obj = dataclasses.asdict(self)
        obj["conserved"] = self.conserved
        return obj

    def render(self) -> str:
        rows = [
            ("Input utterances", self.inputs),
            ("Ingest rejects", self.ingest_rejects),
            ("Generation failures", self.generation_failures),
            ("Filter rejects", self.filter_rejects),
            ("Alignment rejects", self.align_rejects),
            ("Aligned (augmented)", self.aligned),
        ]
        width = max(len(r[0]) for r in rows)
        lines = [f"{name:<{width}}  {value:>8}" for name, value in rows]
        lines.append(f"{'Filter throughput':<{width}}  {self.throughput['throughput_percent']:>8}")
        return "\n".join(lines)


def make_requests(utterances: Sequence[Utterance]) -> list[GenerationRequest]:
    return [GenerationRequest(u.id, u.domain, mark_utterance(u).text) for u in utterances]


def generate_with_checkpoint(
    requests_: Sequence[GenerationRequest],
    backend: genclient.Backend,
    checkpoint: Path,
) -> list[GenerationRecord]:
    """Generate, appending raw records to ``checkpoint`` chunk by chunk.

    Successful records already in the checkpoint are reused, so a run that
    died on a backend error resumes where it stopped. The file is rewritten
    in input order at the end.
    """
    done: dict[str, GenerationRecord] = {}
    if checkpoint.exists():
        for obj in genclient.read_jsonl(checkpoint):
            rec = GenerationRecord.from_json(obj)
            if rec.ok:
                done.setdefault(rec.request.id, rec)
        logger.info("resuming: %d records in %s", len(done), checkpoint)
    todo = [r for r in requests_ if not (r.id in done and done[r.id].request == r)]
    chunk = max(1, backend.batch_size) * max(1, backend.max_in_flight)
    with open(checkpoint, "a", encoding="utf-8") as fh:
        for start in range(0, len(todo), chunk):
            for rec in generate_batch(todo[start : start + chunk], backend):
                done[rec.request.id] = rec
                fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
            fh.flush()
    records = [done[r.id] for r in requests_]
    genclient.write_jsonl(checkpoint, (r.to_json() for r in records))
    return records


def run_augment(config: PipelineConfig) -> AugmentSummary:
    """mark -> generate -> filter -> align -> stats, writing every artifact to ``paths.out_dir``."""
    out = Path(config.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rej_dir = Path(config.paths.rejects_dir) if config.paths.rejects_dir else out
    rej_dir.mkdir(parents=True, exist_ok=True)
    flags = config.flags

    corpus = ingest(config.paths.corpus_in, flags.header, config.split, flags.dedup)
    genclient.write_jsonl(rej_dir / "ingest_rejects.jsonl", (r.to_json() for r in corpus.rejects))
    by_id = {u.id: u for u in corpus.utterances}

    backend = make_backend(config.backend, config.rng_seed)
    records = generate_with_checkpoint(make_requests(corpus.utterances), backend, out / "generations.jsonl")

    failures = [r for r in records if not r.ok]
    genclient.write_jsonl(
        rej_dir / "generation_failures.jsonl",
        ({"id": r.request.id, "candidate": r.candidate, "violations": [r.error]} for r in failures),
    )
    filtered = filter_corpus([r for r in records if r.ok], flags.strict_containment)
    genclient.write_jsonl(
        rej_dir / "filter_rejects.jsonl",
        (
            {"id": r.request.id, "candidate": r.candidate, "violations": [v.value for v in verdict.violations]}
            for r, verdict in filtered.rejected
        ),
    )
    write_json(out / "throughput.json", filtered.report.to_json())
    (out / "throughput.txt").write_text(filtered.report.render() + "\n", encoding="utf-8")

    aligned, align_rejects = align_corpus((by_id[r.request.id], r) for r in filtered.accepted)
    genclient.write_jsonl(rej_dir / "align_rejects.jsonl", (r.to_json() for r in align_rejects))
    (out / "augmented.tsv").write_text(
        augmented_tsv(aligned, TSV_HEADER if flags.header else None), encoding="utf-8"
    )

    stats_json = None
    if config.paths.lexicon_a and config.paths.lexicon_b and aligned:
        tagger = LexiconTagger(load_lexicon(config.paths.lexicon_a), load_lexicon(config.paths.lexicon_b))
        stats = corpus_stats((a.cs_text for a in aligned), tagger)
        write_report(stats, out / "stats.json", out / "stats.txt")
        stats_json = stats.to_json()

    summary = AugmentSummary(
        inputs=len(corpus.utterances),
        ingest_rejects=len(corpus.rejects),
        generation_failures=len(failures),
        filter_rejects=len(filtered.rejected),
        align_rejects=len(align_rejects),
        aligned=len(aligned),
        throughput=filtered.report.to_json(),
        stats=stats_json,
    )
    write_json(out / "summary.json", summary.to_json())
    (out / "summary.txt").write_text(summary.render() + "\n", encoding="utf-8")
    return summary


# --- seed splits ---------------------------------------------------------------------


def make_splits(
    pairs: Sequence[tuple[Utterance, str]],
    sizes: Sequence[int],
    out_dir: Union[str, Path],
    rng_seed: int = 13,
) -> dict[int, Path]:
    """Write ``seed_<n>.tsv`` for each size; every smaller set is a subset of the next."""
    if sizes and max(sizes) > len(pairs):
        raise SizeTooLarge(f"seed size {max(sizes)} exceeds train split size {len(pairs)}")
    seed_pairs = build_seed_pairs(pairs)
    chosen = sample_nested([p.domain for p in seed_pairs], sizes, rng_seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for n in sizes:
        paths[n] = out / f"seed_{n}.tsv"
        paths[n].write_text(seed_tsv([seed_pairs[i] for i in chosen[n]]), encoding="utf-8")
    return paths


# --- evaluation -----------------------------------------------------------------------


@dataclass
class EvalReport:
    counts: dict[str, tuple[int, int]]  # domain -> (matched, total)
    unparseable: dict[str, int]

    @property
    def matched(self) -> int:
        return sum(m for m, _ in self.counts.values())

    @property
    def total(self) -> int:
        return sum(t for _, t in self.counts.values())

    @property
    def overall_em(self) -> float:
        return self.matched / self.total if self.total else 0.0

    @property
    def per_domain_em(self) -> dict[str, float]:
        return {d: m / t for d, (m, t) in sorted(self.counts.items())}

    def to_json(self) -> dict:
        return {
            "overall_em": self.overall_em,
            "matched": self.matched,
            "total": self.total,
            "per_domain_em": self.per_domain_em,
            "counts": {d: {"matched": m, "total": t} for d, (m, t) in sorted(self.counts.items())},
            "unparseable": dict(sorted(self.unparseable.items())),
        }

    def render(self) -> str:
        lines = [f"{'domain':<14} {'matched':>8} {'total':>7} {'unparse':>8} {'EM':>7}"]
        for d, (m, t) in sorted(self.counts.items()):
            lines.append(f"{d:<14} {m:>8} {t:>7} {self.unparseable.get(d, 0):>8} {100 * m / t:>6.1f}%")
        lines.append(
            f"{'overall':<14} {self.matched:>8} {self.total:>7} {sum(self.unparseable.values()):>8} "
            f"{100 * self.overall_em:>6.1f}%"
        )
        return "\n".join(lines)


def evaluate(pred_path: Union[str, Path], gold_path: Union[str, Path], header: bool = True) -> EvalReport:
    """Exact-match accuracy of predicted parses against gold, keyed by line order.

    Unparseable predictions count as misses; an unparseable gold parse is an error.
    """
    pred_rows = list(_rows(pred_path, header, 3))
    gold_rows = list(_rows(gold_path, header, 3))
    if len(pred_rows) != len(gold_rows):
        raise KeyMismatch(f"{len(pred_rows)} predictions for {len(gold_rows)} gold records")
    counts: dict[str, list[int]] = {}
    unparseable: Counter = Counter()
    for (pline, (pdom, ptext, pparse)), (gline, (gdom, gtext, gparse)) in zip(pred_rows, gold_rows):
        if pdom != gdom or ptext.split() != gtext.split():
            raise KeyMismatch(f"prediction line {pline} does not match gold line {gline}")
        try:
            gold = parse_top(gparse)
        except TopError as exc:
            raise UnparseableGold(f"{gold_path}:{gline}: {exc}") from exc
        c = counts.setdefault(gdom, [0, 0])
        c[1] += 1
        try:
            pred = parse_top(pparse)
        except TopError:
            unparseable[gdom] += 1
            continue
        c[0] += exact_match(pred, gold)
    return EvalReport({d: (m, t) for d, (m, t) in counts.items()}, dict(unparseable))
