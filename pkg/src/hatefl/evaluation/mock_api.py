"""Local stand-in for a toxicity API, serving scores from a fixture mapping."""

from __future__ import annotations

import json
import threading
from collections.abc import Mapping
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse


def load_fixture(path: str | Path) -> dict[str, float]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: fixture must map text to score")
    return {str(k): float(v) for k, v in raw.items()}


class MockToxicityServer:
    """Threaded HTTP server speaking the ``simple`` or ``perspective`` profile.

    ``fail_first`` makes the first N requests answer ``fail_status``, for
    exercising retries.  Unknown texts get ``default_score`` or, when that is
    None, a 422.
    """

    def __init__(
        self,
        scores: Mapping[str, float],
        *,
        profile: str = "simple",
        default_score: float | None = None,
        fail_first: int = 0,
        fail_status: int = 500,
        token: str | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
    ) -> None:
        self.scores = dict(scores)
        self.profile = profile
        self.default_score = default_score
        self.fail_first = fail_first
        self.fail_status = fail_status
        self.token = token
        self.request_count = 0
        self._lock = threading.Lock()
        self._server = ThreadingHTTPServer((host, port), self._handler())
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/score"

    def _handler(self):
        mock = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, format: str, *args: object) -> None:
                pass

            def _reply(self, status: int, body: dict) -> None:
                data = json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self) -> None:
                with mock._lock:
                    mock.request_count += 1
                    failing = mock.request_count <= mock.fail_first
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                if failing:
                    return self._reply(mock.fail_status, {"error": "injected failure"})
                if mock.token is not None and not self._authorised():
                    return self._reply(401, {"error": "unauthorised"})
                try:
                    body = json.loads(raw)
                    text = body["comment"]["text"] if mock.profile == "perspective" else body["text"]
                except (ValueError, KeyError, TypeError):
                    return self._reply(400, {"error": "bad request"})
                score = mock.scores.get(text, mock.default_score)
                if score is None:
                    return self._reply(422, {"error": "unknown text"})
                if mock.profile == "perspective":
                    return self._reply(200, {"attributeScores": {"TOXICITY": {"summaryScore": {"value": score}}}})
                return self._reply(200, {"score": score})

            def _authorised(self) -> bool:
                if mock.profile == "perspective":
                    key = parse_qs(urlparse(self.path).query).get("key", [None])[0]
                    return key == mock.token
                return self.headers.get("Authorization") == f"Bearer {mock.token}"

        return Handler

    def start(self) -> "MockToxicityServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join()

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def __enter__(self) -> "MockToxicityServer":
        return self.start()

    def __exit__(self, *exc: object) -> None:
        self.stop()
