import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from csaug.genclient import GenerationRequest, mock_generate

_acceptance: list[tuple[int, str, str, float]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    mark = dict(report.user_properties).get("acceptance")
    if mark:
        number, title = mark
        _acceptance.append((number, title, report.outcome, report.duration))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    mark = item.get_closest_marker("acceptance")
    if mark:
        item.user_properties.append(("acceptance", tuple(mark.args)))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome, duration in sorted(_acceptance):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] AC{number:<2} {title} ({duration:.2f}s)")


class StubGenerator:
    """In-process stand-in for the generation service (faithful mock)."""

    def __init__(self):
        self.fail_first = 0  # number of requests answered with HTTP 503
        self.duplicate = False
        self.garbage = False
        self.drop_ids: set[str] = set()
        self.calls = 0
        self.lock = threading.Lock()


@pytest.fixture
def http_backend():
    state = StubGenerator()

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def do_POST(self):
            body = self.rfile.read(int(self.headers["Content-Length"])).decode()
            with state.lock:
                state.calls += 1
                fail = state.fail_first > 0
                state.fail_first -= 1
            if self.path != "/generate":
                self.send_response(404)
                self.end_headers()
                return
            if fail:
                self.send_response(503)
                self.end_headers()
                return
            lines = []
            for line in body.splitlines():
                req = GenerationRequest.from_json(json.loads(line))
                if req.id in state.drop_ids:
                    continue
                rec = mock_generate(req)
                obj = {"id": req.id, "candidates": [rec.candidate], "model_info": "stub"}
                lines.append(json.dumps(obj))
                if state.duplicate:
                    lines.append(json.dumps({**obj, "candidates": ["DUPLICATE"]}))
            if state.garbage:
                lines.append("{not json")
            payload = ("\n".join(lines) + "\n").encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/jsonl")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    state.url = f"http://127.0.0.1:{server.server_address[1]}"
    yield state
    server.shutdown()
    server.server_close()
