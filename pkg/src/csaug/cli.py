"""Command line entry point: ``csaug <subcommand>``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import genclient, pipeline
from .aligner import AlignmentError, align_corpus, augmented_tsv
from .genclient import BackendError, GenerationRecord, GenerationRequest
from .marker import SeedError, export_seed_pairs
from .spanfilter import StructuralError, filter_corpus
from .stats import HINGLISH_TOP_PUBLISHED, EmptyCorpus, LexiconTagger, MissingLexicon, corpus_stats, load_lexicon
from .top import TopError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3

DATA_ERRORS = (pipeline.DataError, TopError, SeedError, StructuralError, MissingLexicon, EmptyCorpus, AlignmentError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--config", help="YAML or JSON pipeline config", **d)
    p.add_argument("--rng-seed", type=int, help="seed for sampling and mock corruption", **d)
    p.add_argument("--no-header", dest="no_header", action="store_true", help="TSV inputs have no header row", **d)
    p.add_argument("--dedup", action="store_true", help="drop exact duplicate corpus rows", **d)
    p.add_argument(
        "--strict-containment",
        action=argparse.BooleanOptionalAction,
        help="check span nesting against the English parse (default on)",
        **d,
    )
    p.add_argument("-v", "--verbose", action="store_true", **d)


def _report_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")


def _backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=["mock", "replay", "http"], help="backend.kind")
    p.add_argument("--url", help="backend.url")
    p.add_argument("--replay", help="replay JSONL file (implies --backend replay)")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--mock-mode", choices=genclient.MOCK_MODES)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csaug", description="Code-switched data augmentation for TOP semantic parsing.")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        _add_globals(p, suppress=True)
        return p

    p = command("ingest", "validate a domain/utterance/parse TSV")
    p.add_argument("corpus")
    p.add_argument("--out", help="write the valid rows here")
    p.add_argument("--rejects", help="JSONL of rejected rows")
    p.add_argument("--split", default="train")
    _report_flags(p)

    p = command("mark", "write span-marked generation requests")
    p.add_argument("corpus")
    p.add_argument("--out", required=True, help="requests JSONL")
    p.add_argument("--rejects")

    p = command("export-seed", "sample seed pairs from an annotated pair file")
    p.add_argument("pairs", help="TSV: domain, utterance, semantic_parse, marked code-switched text")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--out", required=True)

    p = command("splits", "nested seed sets for each configured size")
    p.add_argument("pairs")
    p.add_argument("--sizes", type=int, nargs="+")
    p.add_argument("--out-dir", required=True)

    p = command("generate", "send requests to the generation backend")
    p.add_argument("requests", help="requests JSONL (from `mark`)")
    p.add_argument("--out", required=True, help="generation records JSONL")
    _backend_flags(p)

    p = command("filter", "apply the span filter to generation records")
    p.add_argument("generations")
    p.add_argument("--accepted", help="JSONL of accepted records")
    p.add_argument("--rejects", help="JSONL of rejected records with violations")
    _report_flags(p)

    p = command("align", "transfer English parses onto accepted records")
    p.add_argument("corpus", help="the English corpus the requests were marked from")
    p.add_argument("generations", help="accepted generation records JSONL")
    p.add_argument("--out", required=True, help="augmented corpus TSV")
    p.add_argument("--rejects")

    p = command("stats", "code-switching statistics of a corpus")
    p.add_argument("corpus", help="plain text (one utterance per line) or TSV")
    p.add_argument("--lexicon-a", required=True, help="first-language word list (e.g. English)")
    p.add_argument("--lexicon-b", required=True, help="second-language word list (e.g. romanized Hindi)")
    p.add_argument("--column", type=int, help="0-based TSV column holding the text")
    p.add_argument("--priority", choices=["a", "b"], default="a")
    p.add_argument("--compare-published", action="store_true", help="show the published Hinglish-TOP figures")
    _report_flags(p)

    p = command("eval", "exact-match accuracy of predictions against gold")
    p.add_argument("pred")
    p.add_argument("gold")
    _report_flags(p)

    p = command("augment", "end-to-end: mark, generate, filter, align, stats")
    p.add_argument("--corpus", help="paths.corpus_in")
    p.add_argument("--out-dir", help="paths.out_dir")
    p.add_argument("--lexicon-a")
    p.add_argument("--lexicon-b")
    _backend_flags(p)
    _report_flags(p)
    return parser


def _config(args: argparse.Namespace) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig.load(args.config) if args.config else pipeline.PipelineConfig()
    if args.rng_seed is not None:
        cfg.rng_seed = args.rng_seed
    if args.no_header:
        cfg.flags.header = False
    if args.dedup:
        cfg.flags.dedup = True
    if args.strict_containment is not None:
        cfg.flags.strict_containment = args.strict_containment
    b = cfg.backend
    if getattr(args, "replay", None):
        b.kind, b.replay_path = "replay", args.replay
    if getattr(args, "backend", None):
        b.kind = args.backend
    if getattr(args, "url", None):
        b.url = args.url
    if getattr(args, "batch_size", None):
        b.batch_size = args.batch_size
    if getattr(args, "mock_mode", None):
        b.mock_mode = args.mock_mode
    return cfg


def _emit(args: argparse.Namespace, obj: dict, table: str) -> None:
    if getattr(args, "report", None):
        pipeline.write_json(args.report, obj)
    print(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) if args.json else table)


def _read_records(path: str) -> list[GenerationRecord]:
    try:
        return [GenerationRecord.from_json(o) for o in genclient.read_jsonl(path)]
    except (OSError, ValueError, KeyError) as exc:
        raise pipeline.DataError(f"cannot read generation records from {path}: {exc}") from exc


def cmd_ingest(args, cfg) -> int:
    corpus = pipeline.ingest(args.corpus, cfg.flags.header, args.split, cfg.flags.dedup)
    if args.out:
        head = pipeline.TSV_HEADER + "\n" if cfg.flags.header else ""
        rows = (f"{u.domain}\t{u.text}\t{u.parse}\n" for u in corpus.utterances)
        Path(args.out).write_text(head + "".join(rows), encoding="utf-8")
    if args.rejects:
        genclient.write_jsonl(args.rejects, (r.to_json() for r in corpus.rejects))
    n, r = len(corpus.utterances), len(corpus.rejects)
    table = f"{'Utterances':<12} {n:>8}\n{'Rejects':<12} {r:>8}"
    for rej in corpus.rejects[:20]:
        table += f"\n  line {rej.line}: {rej.reason}: {rej.message}"
    _emit(args, {"utterances": n, "rejects": r, "reject_lines": [x.line for x in corpus.rejects]}, table)
    return EXIT_OK


def cmd_mark(args, cfg) -> int:
    corpus = pipeline.ingest(args.corpus, cfg.flags.header, cfg.split, cfg.flags.dedup)
    genclient.write_jsonl(args.out, (r.to_json() for r in pipeline.make_requests(corpus.utterances)))
    if args.rejects:
        genclient.write_jsonl(args.rejects, (r.to_json() for r in corpus.rejects))
    print(f"marked {len(corpus.utterances)} utterances, {len(corpus.rejects)} rejects")
    return EXIT_OK


def cmd_export_seed(args, cfg) -> int:
    pairs = pipeline.read_pairs(args.pairs, cfg.flags.header)
    sample = export_seed_pairs(pairs, args.size, args.out, cfg.rng_seed)
    print(f"wrote {len(sample)} seed pairs to {args.out}")
    return EXIT_OK


def cmd_splits(args, cfg) -> int:
    pairs = pipeline.read_pairs(args.pairs, cfg.flags.header)
    sizes = args.sizes or cfg.seed_sizes
    for n, path in pipeline.make_splits(pairs, sizes, args.out_dir, cfg.rng_seed).items():
        print(f"{n:>6}  {path}")
    return EXIT_OK


def cmd_generate(args, cfg) -> int:
    try:
        reqs = [GenerationRequest.from_json(o) for o in genclient.read_jsonl(args.requests)]
    except (OSError, ValueError, KeyError) as exc:
        raise pipeline.DataError(f"cannot read requests from {args.requests}: {exc}") from exc
    backend = genclient.make_backend(cfg.backend, cfg.rng_seed)
    records = pipeline.generate_with_checkpoint(reqs, backend, Path(args.out))
    failed = sum(not r.ok for r in records)
    print(f"generated {len(records)} records ({failed} failed)")
    return EXIT_OK


def cmd_filter(args, cfg) -> int:
    records = _read_records(args.generations)
    result = filter_corpus([r for r in records if r.ok], cfg.flags.strict_containment)
    if args.accepted:
        genclient.write_jsonl(args.accepted, (r.to_json() for r in result.accepted))
    if args.rejects:
        genclient.write_jsonl(
            args.rejects,
            ({"id": r.request.id, "candidate": r.candidate, "violations": [v.value for v in v_.violations]}
             for r, v_ in result.rejected),
        )
    obj = result.report.to_json()
    obj["generation_failures"] = sum(not r.ok for r in records)
    _emit(args, obj, result.report.render())
    return EXIT_OK


def cmd_align(args, cfg) -> int:
    corpus = pipeline.ingest(args.corpus, cfg.flags.header, cfg.split, cfg.flags.dedup)
    by_id = {u.id: u for u in corpus.utterances}
    records = _read_records(args.generations)
    missing = [r.request.id for r in records if r.request.id not in by_id]
    if missing:
        raise pipeline.KeyMismatch(f"{len(missing)} record id(s) not in {args.corpus}, e.g. {missing[0]}")
    aligned, rejects = align_corpus((by_id[r.request.id], r) for r in records if r.ok)
    Path(args.out).write_text(augmented_tsv(aligned, pipeline.TSV_HEADER if cfg.flags.header else None), encoding="utf-8")
    if args.rejects:
        genclient.write_jsonl(args.rejects, (r.to_json() for r in rejects))
    print(f"aligned {len(aligned)} records, {len(rejects)} rejects")
    return EXIT_OK


def cmd_stats(args, cfg) -> int:
    tagger = LexiconTagger(load_lexicon(args.lexicon_a), load_lexicon(args.lexicon_b), args.priority)
    try:
        lines = Path(args.corpus).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise pipeline.FileUnreadable(str(exc)) from exc
    if args.column is not None:
        if cfg.flags.header:
            lines = lines[1:]
        lines = [ln.split("\t")[args.column] for ln in lines if ln.strip()]
    stats = corpus_stats((ln for ln in lines if ln.strip()), tagger)
    ref = HINGLISH_TOP_PUBLISHED if args.compare_published else None
    obj = stats.to_json()
    if ref:
        obj["published"] = dict(ref)
    _emit(args, obj, stats.render(reference=ref))
    return EXIT_OK


def cmd_eval(args, cfg) -> int:
    report = pipeline.evaluate(args.pred, args.gold, cfg.flags.header)
    _emit(args, report.to_json(), report.render())
    return EXIT_OK


def cmd_augment(args, cfg) -> int:
    if args.corpus:
        cfg.paths.corpus_in = args.corpus
    if args.out_dir:
        cfg.paths.out_dir = args.out_dir
    if args.lexicon_a:
        cfg.paths.lexicon_a = args.lexicon_a
    if args.lexicon_b:
        cfg.paths.lexicon_b = args.lexicon_b
    if not cfg.paths.corpus_in:
        raise UsageError("no input corpus: pass --corpus or set paths.corpus_in")
    summary = pipeline.run_augment(cfg)
    _emit(args, summary.to_json(), summary.render())
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "mark": cmd_mark,
    "export-seed": cmd_export_seed,
    "splits": cmd_splits,
    "generate": cmd_generate,
    "filter": cmd_filter,
    "align": cmd_align,
    "stats": cmd_stats,
    "eval": cmd_eval,
    "augment": cmd_augment,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, pipeline.ConfigError) as exc:
        print(f"csaug: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"csaug: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DATA_ERRORS as exc:
        print(f"csaug: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
