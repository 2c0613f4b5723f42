"""In-process mock of the embedding service wire protocol.

Serves POST /v1/embed and GET /v1/health on a random localhost port.
Vectors are a deterministic function of (model, text) so tests can
recompute what the client should have received. Failure modes are
configurable: fail the first N embed calls with a 503, or report a wrong
dimension.
"""

from __future__ import annotations

import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np


def expected_vector(model: str, text: str, dim: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{model}|{text}".encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.standard_normal(dim)


class MockEmbedService:
    def __init__(self, dim: int = 8, models: tuple[str, ...] = ("xlmr",),
                 fail_first: int = 0, report_dim: int | None = None,
                 healthy: bool = True):
        self.dim = dim
        self.models = models
        self.fail_first = fail_first
        self.report_dim = report_dim if report_dim is not None else dim
        self.healthy = healthy
        self.embed_calls = 0
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        service = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, code: int, payload: dict):
                body = json.dumps(payload).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path != "/v1/health":
                    self._send(404, {"error": "not found"})
                    return
                if not service.healthy:
                    self._send(503, {"error": "loading"})
                    return
                self._send(200, {"status": "ok", "models": list(service.models),
                                 "dims": {m: service.dim for m in service.models}})

            def do_POST(self):
                if self.path != "/v1/embed":
                    self._send(404, {"error": "not found"})
                    return
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                with service._lock:
                    service.embed_calls += 1
                    service.requests.append(body)
                    call_no = service.embed_calls
                if call_no <= service.fail_first:
                    self._send(503, {"error": "transient failure"})
                    return
                model = body.get("model")
                if model not in service.models:
                    self._send(404, {"error": f"unknown model {model!r}"})
                    return
                vectors = [expected_vector(model, t, service.dim).tolist()
                           for t in body.get("texts", [])]
                self._send(200, {"model": model, "dim": service.report_dim,
                                 "vectors": vectors})

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def __enter__(self) -> "MockEmbedService":
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()
