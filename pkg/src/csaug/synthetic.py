"""Random well-formed TOP trees and corpora for property tests and load runs."""

from __future__ import annotations

import random
from typing import Iterator, Optional, Sequence

from .top import NodeKind, ParseNode, ParseTree, Utterance, serialize

WORDS = (
    "set alarm for am pm on tuesday thursday remind me to call mom play song "
    "weather in canada traffic to work timer minutes send message that the "
    "of next week at 5 9:30 tomorrow morning tonight album spotify event near"
).split()
INTENTS = ("CREATE_ALARM", "GET_WEATHER", "CREATE_REMINDER", "PLAY_MUSIC", "GET_INFO_TRAFFIC", "SEND_MESSAGE", "GET_EVENT", "CREATE_TIMER")
SLOTS = ("DATE_TIME", "LOCATION", "TODO", "PERSON_REMINDED", "MUSIC_TYPE", "CONTENT_EXACT", "RECIPIENT", "METHOD_TIMER")
DOMAINS = ("alarm", "event", "messaging", "music", "navigation", "reminder", "timer", "weather")

# substitutions used by faithful mock generation in tests and demos
HINGLISH_TABLE = {
    "set": "set karo",
    "for": "ke liye",
    "on": "ko",
    "remind": "yaad",
    "me": "mujhe",
    "to": "ko",
    "play": "bajao",
    "in": "me",
    "of": "ka",
    "next": "agle",
    "tomorrow": "kal",
    "morning": "subah",
    "tonight": "aaj raat",
    "that": "ki",
    "at": "par",
}


def random_node(rng: random.Random, kind: NodeKind, depth: int, max_depth: int) -> ParseNode:
    labels = INTENTS if kind is NodeKind.INTENT else SLOTS
    children: list[ParseNode] = []
    for _ in range(rng.randint(1, 4)):
        if depth < max_depth and rng.random() < 0.35:
            child_kind = NodeKind.SLOT if kind is NodeKind.INTENT else NodeKind.INTENT
            children.append(random_node(rng, child_kind, depth + 1, max_depth))
        else:
            for _ in range(rng.randint(1, 3)):
                children.append(ParseNode(NodeKind.TOKEN, text=rng.choice(WORDS)))
    return ParseNode(kind, label=rng.choice(labels), children=tuple(children))


def random_tree(rng: random.Random, max_depth: int = 4) -> ParseTree:
    return ParseTree(random_node(rng, NodeKind.INTENT, 0, max_depth))


def random_utterance(rng: random.Random, domain: Optional[str] = None, max_depth: int = 4, id: str = "") -> Utterance:
    tree = random_tree(rng, max_depth)
    return Utterance(domain or rng.choice(DOMAINS), " ".join(tree.tokens), tree, id=id)


def random_corpus(n: int, seed: int = 0, max_depth: int = 3, domains: Sequence[str] = DOMAINS) -> list[Utterance]:
    rng = random.Random(seed)
    return [random_utterance(rng, rng.choice(domains), max_depth, id=str(i)) for i in range(n)]


def tsv_rows(n: int, seed: int = 0, max_depth: int = 3) -> Iterator[str]:
    """Lines of a synthetic ``domain<TAB>utterance<TAB>semantic_parse`` file."""
    rng = random.Random(seed)
    for _ in range(n):
        u = random_utterance(rng, max_depth=max_depth)
        yield f"{u.domain}\t{u.text}\t{serialize(u.parse)}\n"
