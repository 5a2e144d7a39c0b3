"""In-process HTTP stub for /generate and /embed contract tests.

Runs a ThreadingHTTPServer on an ephemeral port. Behavior is configured
on the server object: canned beams, echo-last-title mode, or fault
injection (fail the first N requests, or fail when the prompt contains a
marker substring).
"""

from __future__ import annotations

import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np


def stub_embedding(text: str, dim: int) -> list[float]:
    """Deterministic per-text unit vector, independent of the engine's mock."""
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(dim)
    vec /= np.linalg.norm(vec)
    return [float(x) for x in vec]


def last_title_line(prompt: str) -> str:
    lines = [l for l in prompt.splitlines() if l.startswith("Title: ")]
    return lines[-1] if lines else ""


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):  # silence request logging
        pass

    def _reply(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        server: StubServer = self.server  # type: ignore[assignment]
        length = int(self.headers.get("Content-Length", 0))
        request = json.loads(self.rfile.read(length) or b"{}")
        with server.lock:
            server.requests.append((self.path, request))
            server.request_count += 1
            count = server.request_count

        if server.fail_first_n and count <= server.fail_first_n:
            self._reply(500, {"error": "injected transient failure"})
            return

        if self.path == "/generate":
            prompt = request.get("prompt", "")
            if server.fail_marker and server.fail_marker in prompt:
                self._reply(500, {"error": "injected per-user failure"})
                return
            if server.canned_beams is not None:
                candidates = [
                    {"text": text, "score": -float(i)}
                    for i, text in enumerate(server.canned_beams)
                ]
            else:  # echo mode: continue with the last history item line
                candidates = [{"text": last_title_line(prompt) + "\n", "score": 0.0}]
            num_beams = int(request.get("num_beams", len(candidates)))
            self._reply(200, {"candidates": candidates[:num_beams]})
        elif self.path == "/embed":
            texts = request.get("texts", [])
            if not texts:
                self._reply(400, {"error": "texts must be non-empty"})
                return
            role = request.get("role", "query")
            vectors = [stub_embedding(f"{role}: {t}", server.embed_dim) for t in texts]
            self._reply(200, {"dim": server.embed_dim, "vectors": vectors, "normalized": True})
        else:
            self._reply(404, {"error": "unknown endpoint"})


class StubServer(ThreadingHTTPServer):
    def __init__(self):
        super().__init__(("127.0.0.1", 0), _Handler)
        self.lock = threading.Lock()
        self.requests: list[tuple[str, dict]] = []
        self.request_count = 0
        self.canned_beams: list[str] | None = None
        self.fail_first_n = 0
        self.fail_marker: str | None = None
        self.embed_dim = 16

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def reset(self) -> None:
        with self.lock:
            self.requests.clear()
            self.request_count = 0
        self.canned_beams = None
        self.fail_first_n = 0
        self.fail_marker = None


def start_stub() -> StubServer:
    server = StubServer()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server
