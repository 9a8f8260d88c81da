"""Gateway to the code-switch generation backend.

Wire protocol (HTTP POST ``<url>/generate``), JSON lines both ways::

    request:  {"id": "...", "domain": "...", "marked_text": "..."}
    response: {"id": "...", "candidates": ["..."], "model_info": "..."}

Responses are matched to requests by id; the first response seen for an id
wins. A replay backend serves the same response objects from a JSONL file.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Protocol, Sequence, Union

import requests

from .spanfilter import CLOSE_RE, OPEN

logger = logging.getLogger(__name__)

MISSING_RESPONSE = "MissingResponse"
EMPTY_CANDIDATES = "EmptyCandidates"


class BackendError(RuntimeError):
    pass


class BackendUnavailable(BackendError):
    pass


class TimeoutPerBatch(BackendUnavailable):
    pass


class ProtocolError(BackendError):
    pass


@dataclass(frozen=True)
class GenerationRequest:
    id: str
    domain: str
    marked_text: str

    def to_json(self) -> dict:
        return {"id": self.id, "domain": self.domain, "marked_text": self.marked_text}

    @classmethod
    def from_json(cls, obj: Mapping) -> "GenerationRequest":
        return cls(str(obj["id"]), str(obj.get("domain", "")), str(obj["marked_text"]))


@dataclass(frozen=True)
class GenerationRecord:
    request: GenerationRequest
    candidate: Optional[str]
    backend_info: str = ""
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.candidate is not None

    def to_json(self) -> dict:
        obj = self.request.to_json()
        obj.update(candidate=self.candidate, backend_info=self.backend_info, error=self.error)
        return obj

    @classmethod
    def from_json(cls, obj: Mapping) -> "GenerationRecord":
        return cls(
            GenerationRequest.from_json(obj),
            obj.get("candidate"),
            obj.get("backend_info", ""),
            obj.get("error"),
        )


def parse_response_lines(text: str) -> dict[str, dict]:
    """Decode a JSON-lines response body into {id: object}, keeping the first per id."""
    out: dict[str, dict] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"response line {lineno} is not JSON: {exc}") from None
        if not isinstance(obj, dict) or "id" not in obj:
            raise ProtocolError(f"response line {lineno} has no id")
        cands = obj.get("candidates")
        if not isinstance(cands, list) or not all(isinstance(c, str) for c in cands):
            raise ProtocolError(f"response line {lineno}: candidates must be a list of strings")
        out.setdefault(str(obj["id"]), obj)
    return out


def _record_from_response(req: GenerationRequest, obj: Optional[dict], latency_ms: float = 0.0) -> GenerationRecord:
    if obj is None:
        return GenerationRecord(req, None, "", MISSING_RESPONSE)
    info = str(obj.get("model_info", ""))
    if latency_ms:
        info = f"{info} latency_ms={latency_ms:.0f}".strip()
    if not obj["candidates"]:
        return GenerationRecord(req, None, info, EMPTY_CANDIDATES)
    # one candidate per input; extra n-best entries are ignored
    return GenerationRecord(req, obj["candidates"][0], info)


class Backend(Protocol):
    batch_size: int
    max_in_flight: int

    def generate(self, batch: Sequence[GenerationRequest]) -> list[GenerationRecord]: ...


class ReplayBackend:
    def __init__(self, path: Union[str, Path], batch_size: int = 64):
        self.path = Path(path)
        if not self.path.exists():
            raise BackendUnavailable(f"replay file not found: {self.path}")
        self.responses = parse_response_lines(self.path.read_text(encoding="utf-8"))
        self.batch_size = batch_size
        self.max_in_flight = 1

    def generate(self, batch: Sequence[GenerationRequest]) -> list[GenerationRecord]:
        return [_record_from_response(r, self.responses.get(r.id)) for r in batch]


class HttpBackend:
    def __init__(
        self,
        url: str,
        batch_size: int = 64,
        timeout_s: float = 30.0,
        retries: int = 3,
        max_in_flight: int = 4,
        backoff_s: float = 0.5,
    ):
        self.endpoint = url.rstrip("/")
        if not self.endpoint.endswith("/generate"):
            self.endpoint += "/generate"
        self.batch_size = batch_size
        self.timeout_s = timeout_s
        self.retries = retries
        self.max_in_flight = max_in_flight
        self.backoff_s = backoff_s

    def _post(self, body: str) -> str:
        last: Optional[Exception] = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                resp = requests.post(
                    self.endpoint,
                    data=body.encode("utf-8"),
                    headers={"Content-Type": "application/jsonl"},
                    timeout=self.timeout_s,
                )
            except requests.RequestException as exc:
                last = exc
                logger.warning("generate attempt %d failed: %s", attempt + 1, exc)
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last = BackendUnavailable(f"HTTP {resp.status_code}")
                logger.warning("generate attempt %d got HTTP %d", attempt + 1, resp.status_code)
                continue
            if resp.status_code != 200:
                raise ProtocolError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return resp.text
        if isinstance(last, requests.Timeout):
            raise TimeoutPerBatch(f"batch timed out after {self.retries + 1} attempts")
        raise BackendUnavailable(f"{self.endpoint} unavailable after {self.retries + 1} attempts: {last}")

    def generate(self, batch: Sequence[GenerationRequest]) -> list[GenerationRecord]:
        body = "".join(json.dumps(r.to_json(), ensure_ascii=False) + "\n" for r in batch)
        started = time.perf_counter()
        responses = parse_response_lines(self._post(body))
        per_item = (time.perf_counter() - started) * 1000 / max(len(batch), 1)
        return [_record_from_response(r, responses.get(r.id), per_item) for r in batch]


# --- mock generation -------------------------------------------------------

MOCK_MODES = ("faithful", "corrupt-R1", "corrupt-R2", "corrupt-R3", "corrupt-R4")

_ONES = "zero one two three four five six seven eight nine ten eleven twelve thirteen fourteen fifteen sixteen seventeen eighteen nineteen".split()
_TENS = "_ _ twenty thirty forty fifty sixty seventy eighty ninety".split()


def number_word(n: int) -> str:
    if n < 20:
        return _ONES[n]
    if n < 100:
        tens, ones = divmod(n, 10)
        return _TENS[tens] + ("" if ones == 0 else "-" + _ONES[ones])
    return "n" + number_word(n % 100)


def _span_bounds(tokens: Sequence[str]) -> list[tuple[int, int, int]]:
    """(open index, close index, id) for every span, ordered by opening bracket."""
    stack, out = [], []
    for i, tok in enumerate(tokens):
        if tok == OPEN:
            stack.append(i)
        else:
            m = CLOSE_RE.fullmatch(tok)
            if m:
                out.append((stack.pop(), i, int(m.group(1))))
    return sorted(out)


def mock_generate(
    request: GenerationRequest,
    table: Optional[Mapping[str, str]] = None,
    mode: str = "faithful",
) -> GenerationRecord:
    """Deterministic stand-in for the generator.

    ``faithful`` substitutes plain tokens through ``table`` (a replacement may
    be several words) and keeps every bracket. The corrupt modes inject one
    filter error each:

    * R1 duplicates the last span (UnequalSpanCount)
    * R2 spells the last close id as a word, ``]_two`` (MalformedSpanId)
    * R3 adds a stray ``[`` before the first span (UnbalancedBrackets)
    * R4 renumbers the last span to max id + 1 (MismatchedSpanIds)

    On inputs without spans R1 and R4 can only wrap the first token in a new
    span, which trips both MismatchedSpanIds and UnequalSpanCount.
    """
    if mode not in MOCK_MODES:
        raise ValueError(f"unknown mock mode {mode!r}")
    table = table or {}
    tokens = []
    for tok in request.marked_text.split():
        if tok == OPEN or CLOSE_RE.fullmatch(tok):
            tokens.append(tok)
        else:
            rep = table.get(tok, table.get(tok.lower(), tok))
            tokens.extend(rep.split())
    spans = _span_bounds(tokens)
    if mode == "corrupt-R1":
        if spans:
            start, end, _ = max(spans, key=lambda s: s[1])
            tokens = tokens + tokens[start : end + 1]
        else:
            tokens = [OPEN, *tokens[:1], "]_1", *tokens[1:]]
    elif mode == "corrupt-R2":
        if spans:
            _, end, span_id = max(spans, key=lambda s: s[1])
            tokens[end] = f"]_{number_word(span_id)}"
        else:
            tokens = [OPEN, *tokens[:1], "]_one", *tokens[1:]]
    elif mode == "corrupt-R3":
        at = spans[0][0] if spans else 0
        tokens.insert(at, OPEN)
    elif mode == "corrupt-R4":
        if spans:
            _, end, _ = max(spans, key=lambda s: s[1])
            tokens[end] = f"]_{max(s[2] for s in spans) + 1}"
        else:
            tokens = [OPEN, *tokens[:1], "]_1", *tokens[1:]]
    return GenerationRecord(request, " ".join(tokens), f"mock:{mode} latency_ms=0")


ModeChooser = Callable[[GenerationRequest], str]


def hashed_modes(corrupt_mode: str, fraction: float, rng_seed: int = 0) -> ModeChooser:
    """Corrupt a deterministic, id-keyed ``fraction`` of requests."""

    def choose(req: GenerationRequest) -> str:
        digest = hashlib.sha256(f"{rng_seed}:{req.id}".encode()).digest()
        u = int.from_bytes(digest[:8], "big") / 2**64
        return corrupt_mode if u < fraction else "faithful"

    return choose


class MockBackend:
    def __init__(
        self,
        table: Optional[Mapping[str, str]] = None,
        mode: Union[str, ModeChooser] = "faithful",
        batch_size: int = 64,
    ):
        self.table = dict(table or {})
        for src, dst in self.table.items():
            # a replacement that looks like a mark would corrupt faithful output
            if any(t.startswith(("[", "]")) for t in f"{src} {dst}".split()):
                raise ValueError(f"mock table entry {src!r} -> {dst!r} contains a bracket token")
        self.mode = mode
        self.batch_size = batch_size
        self.max_in_flight = 1

    def generate(self, batch: Sequence[GenerationRequest]) -> list[GenerationRecord]:
        out = []
        for req in batch:
            mode = self.mode(req) if callable(self.mode) else self.mode
            out.append(mock_generate(req, self.table, mode))
        return out


# --- batching ---------------------------------------------------------------


def _chunks(items: Sequence, size: int) -> list[Sequence]:
    return [items[i : i + size] for i in range(0, len(items), size)]


def generate_batch(requests_: Sequence[GenerationRequest], backend: Backend) -> list[GenerationRecord]:
    """One record per request, in input order.

    Batches are issued with at most ``backend.max_in_flight`` in flight.
    Backend failures propagate after the backend's own retries.
    """
    batches = _chunks(list(requests_), max(1, backend.batch_size))
    if backend.max_in_flight <= 1 or len(batches) <= 1:
        results = [backend.generate(b) for b in batches]
    else:
        with ThreadPoolExecutor(max_workers=backend.max_in_flight) as pool:
            results = list(pool.map(backend.generate, batches))
    out: list[GenerationRecord] = []
    for batch, recs in zip(batches, results):
        if len(recs) != len(batch) or any(r.request.id != q.id for r, q in zip(recs, batch)):
            raise ProtocolError("backend returned records out of step with its batch")
        out.extend(recs)
    return out


@dataclass
class BackendConfig:
    kind: str = "mock"
    url: str = ""
    batch_size: int = 64
    timeout_s: float = 30.0
    retries: int = 3
    max_in_flight: int = 4
    replay_path: str = ""
    mock_table: dict[str, str] = field(default_factory=dict)
    mock_table_path: str = ""
    mock_mode: str = "faithful"
    corrupt_mode: str = "corrupt-R2"
    corrupt_fraction: float = 0.0


def load_table(path: Union[str, Path]) -> dict[str, str]:
    """Token substitution table: one ``token<TAB>replacement`` per line."""
    table = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            src, _, dst = line.partition("\t")
            table[src.strip()] = dst.strip() or src.strip()
    return table


def make_backend(cfg: BackendConfig, rng_seed: int = 0) -> Backend:
    if cfg.kind == "http":
        if not cfg.url:
            raise ValueError("backend.url is required for the http backend")
        return HttpBackend(cfg.url, cfg.batch_size, cfg.timeout_s, cfg.retries, cfg.max_in_flight)
    if cfg.kind == "replay":
        return ReplayBackend(cfg.replay_path, cfg.batch_size)
    if cfg.kind == "mock":
        table = dict(cfg.mock_table)
        if cfg.mock_table_path:
            table.update(load_table(cfg.mock_table_path))
        mode: Union[str, ModeChooser] = cfg.mock_mode
        if cfg.corrupt_fraction > 0:
            mode = hashed_modes(cfg.corrupt_mode, cfg.corrupt_fraction, rng_seed)
        return MockBackend(table, mode, cfg.batch_size)
    raise ValueError(f"unknown backend kind {cfg.kind!r}")


def read_jsonl(path: Union[str, Path]) -> Iterable[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def write_jsonl(path: Union[str, Path], objs: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
