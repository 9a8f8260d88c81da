"""Corpus statistics for code-switched text: vocabularies, per-language
token averages and code-switch points."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

LANG_A, LANG_B, OTHER = "a", "b", "other"

# Published figures for the human-annotated Hinglish-TOP corpus, shown next
# to computed values for comparison only.
HINGLISH_TOP_PUBLISHED = {
    "vocab_a": 4857,
    "vocab_b": 1931,
    "total_utterances": 10896,
    "avg_tokens_b": 4.36,
    "avg_tokens_a": 3.82,
    "avg_cs_points": 3.56,
}


class MissingLexicon(ValueError):
    pass


class EmptyCorpus(ValueError):
    pass


def load_lexicon(path: Union[str, Path]) -> frozenset[str]:
    p = Path(path)
    if not p.is_file():
        raise MissingLexicon(f"lexicon not found: {p}")
    words = (line.strip() for line in p.read_text(encoding="utf-8").splitlines())
    return frozenset(w.casefold() for w in words if w)


class LexiconTagger:
    """Tags tokens by case-insensitive lexicon lookup.

    Tokens in both lexicons go to ``priority``; tokens without letters
    (digits, punctuation) and unknown tokens are ``other``.
    """

    def __init__(self, lexicon_a: Optional[Iterable[str]], lexicon_b: Optional[Iterable[str]], priority: str = LANG_A):
        if lexicon_a is None or lexicon_b is None:
            raise MissingLexicon("both lexicons are required")
        if priority not in (LANG_A, LANG_B):
            raise ValueError(f"priority must be {LANG_A!r} or {LANG_B!r}")
        self.lexicon_a = frozenset(w.casefold() for w in lexicon_a)
        self.lexicon_b = frozenset(w.casefold() for w in lexicon_b)
        self.priority = priority

    def tag(self, tok: str) -> str:
        if not any(ch.isalpha() for ch in tok):
            return OTHER
        key = tok.casefold()
        in_a, in_b = key in self.lexicon_a, key in self.lexicon_b
        if in_a and in_b:
            return self.priority
        if in_a:
            return LANG_A
        if in_b:
            return LANG_B
        return OTHER

    def __call__(self, tokens: Sequence[str]) -> list[str]:
        return [self.tag(t) for t in tokens]


Tagger = Callable[[Sequence[str]], list[str]]


def tag_tokens(text: str, tagger: Tagger) -> list[tuple[str, str]]:
    tokens = text.split()
    return list(zip(tokens, tagger(tokens)))


def cs_points(tags: Iterable[str]) -> int:
    seq = [t for t in tags if t != OTHER]
    return sum(1 for x, y in zip(seq, seq[1:]) if x != y)


@dataclass(frozen=True)
class CorpusStats:
    vocab_a: int
    vocab_b: int
    total_utterances: int
    avg_tokens_a: float
    avg_tokens_b: float
    avg_cs_points: float

    def to_json(self) -> dict:
        return asdict(self)

    def render(self, name_a: str = "English", name_b: str = "Romanized Hindi", reference: Optional[dict] = None) -> str:
        rows = [
            (f"{name_a} Vocabulary size", "vocab_a", "{:d}"),
            (f"{name_b} Vocabulary size", "vocab_b", "{:d}"),
            ("Total utterances", "total_utterances", "{:,d}"),
            (f"Avg. # of {name_b} tokens per utterance", "avg_tokens_b", "{:.2f}"),
            (f"Avg. # of {name_a} tokens per utterance", "avg_tokens_a", "{:.2f}"),
            ("Avg. # of CS points per utterance", "avg_cs_points", "{:.2f}"),
        ]
        width = max(len(r[0]) for r in rows)
        lines = []
        for title, key, fmt in rows:
            line = f"{title:<{width}}  {fmt.format(getattr(self, key)):>10}"
            if reference is not None and key in reference:
                line += f"  (published {fmt.format(reference[key])})"
            lines.append(line)
        return "\n".join(lines)


def corpus_stats(corpus: Iterable[str], tagger: Tagger) -> CorpusStats:
    vocab: dict[str, set[str]] = {LANG_A: set(), LANG_B: set()}
    n = tok_a = tok_b = points = 0
    for text in corpus:
        n += 1
        tokens = text.split()
        tags = tagger(tokens)
        for tok, tag in zip(tokens, tags):
            if tag in vocab:
                vocab[tag].add(tok.casefold())
        tok_a += tags.count(LANG_A)
        tok_b += tags.count(LANG_B)
        points += cs_points(tags)
    if n == 0:
        raise EmptyCorpus("cannot compute statistics of an empty corpus")
    return CorpusStats(len(vocab[LANG_A]), len(vocab[LANG_B]), n, tok_a / n, tok_b / n, points / n)


def write_report(stats: CorpusStats, json_path: Union[str, Path], text_path: Union[str, Path], **render_kw) -> None:
    Path(json_path).write_text(json.dumps(stats.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    Path(text_path).write_text(stats.render(**render_kw) + "\n", encoding="utf-8")
