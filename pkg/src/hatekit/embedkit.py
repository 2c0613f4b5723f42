"""Pluggable sentence-embedding backends.

Two kinds: a deterministic hash embedder (no network, no model weights;
every test and offline run uses it) and a client for the remote
transformer-embedding service speaking the JSON protocol below.

Wire protocol:
    POST {endpoint}/v1/embed   {"model": "<id>", "texts": [...]}
        -> 200 {"model": "<id>", "dim": <int>, "vectors": [[...], ...]}
        -> 4xx/5xx {"error": "<message>"}
    GET  {endpoint}/v1/health  -> 200 {"status": "ok", "models": [...]}
"""

from __future__ import annotations

import enum
import hashlib
import time
from dataclasses import dataclass

import numpy as np
import requests

from . import emojikit
from .errors import PipelineError

MAX_ATTEMPTS = 3
BACKOFF_BASE_S = 0.2


class ServiceUnavailable(PipelineError):
    pass


class DimMismatch(PipelineError):
    pass


class ProtocolError(PipelineError):
    pass


class BackendKind(enum.Enum):
    HASH = "hash"
    REMOTE = "remote"


@dataclass(frozen=True)
class EmbeddingBackendSpec:
    kind: BackendKind
    dim: int
    model_id: str = ""
    endpoint: str = ""
    timeout_ms: int = 10_000
    max_batch: int = 32
    seed: int = 0  # HASH only

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("backend dim must be positive")
        if self.kind is BackendKind.REMOTE and (not self.endpoint or not self.model_id):
            raise ValueError("REMOTE backend requires endpoint and model_id")
        if self.timeout_ms <= 0 or self.max_batch <= 0:
            raise ValueError("timeout_ms and max_batch must be positive")

    @property
    def backend_id(self) -> str:
        if self.kind is BackendKind.HASH:
            return f"hash:d{self.dim}:s{self.seed}"
        return f"remote:{self.model_id}:d{self.dim}"


def hash_embed(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic pseudo-embedding: each whitespace token hashes to a
    PRNG-drawn vector; token vectors are mean-pooled and L2-normalized.
    Empty text gives the zero vector."""
    if dim < 8:
        raise ValueError("hash embedding dim must be >= 8")
    tokens = text.split()
    if not tokens:
        return np.zeros(dim)
    acc = np.zeros(dim)
    for tok in tokens:
        digest = hashlib.blake2b(f"{seed}\x00{tok}".encode("utf-8"), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        acc = acc + rng.standard_normal(dim)
    vec = acc / len(tokens)
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def embed_batch(backend: EmbeddingBackendSpec, texts: list[str]) -> list[np.ndarray]:
    """One vector per input text, order preserved.

    REMOTE requests are chunked to ``max_batch``, retried up to
    MAX_ATTEMPTS with exponential backoff, and re-assembled in order. A
    failed chunk raises; results are never silently truncated.
    """
    if backend.kind is BackendKind.HASH:
        return [hash_embed(t, backend.dim, backend.seed) for t in texts]
    out: list[np.ndarray] = []
    for start in range(0, len(texts), backend.max_batch):
        out.extend(_embed_chunk(backend, texts[start:start + backend.max_batch]))
    return out


def _embed_chunk(backend: EmbeddingBackendSpec, chunk: list[str]) -> list[np.ndarray]:
    url = backend.endpoint.rstrip("/") + "/v1/embed"
    body = {"model": backend.model_id, "texts": chunk}
    timeout = backend.timeout_ms / 1000.0
    last_error = "no attempt made"
    for attempt in range(MAX_ATTEMPTS):
        if attempt:
            time.sleep(BACKOFF_BASE_S * 2 ** (attempt - 1))
        try:
            resp = requests.post(url, json=body, timeout=timeout)
        except requests.RequestException as exc:
            last_error = str(exc)
            continue
        if 400 <= resp.status_code < 500:
            # deterministic rejection; retrying will not help
            raise ServiceUnavailable(f"{url}: HTTP {resp.status_code}: {_error_message(resp)}")
        if resp.status_code != 200:
            last_error = f"HTTP {resp.status_code}: {_error_message(resp)}"
            continue
        return _parse_vectors(backend, chunk, resp)
    raise ServiceUnavailable(f"{url}: giving up after {MAX_ATTEMPTS} attempts ({last_error})")


def _error_message(resp: requests.Response) -> str:
    try:
        return resp.json().get("error", resp.text[:200])
    except ValueError:
        return resp.text[:200]


def _parse_vectors(backend: EmbeddingBackendSpec, chunk: list[str], resp: requests.Response) -> list[np.ndarray]:
    try:
        payload = resp.json()
    except ValueError as exc:
        raise ProtocolError(f"malformed JSON from service: {exc}") from None
    if not isinstance(payload, dict) or "vectors" not in payload or "dim" not in payload:
        raise ProtocolError(f"unexpected response shape: {str(payload)[:200]}")
    if payload["dim"] != backend.dim:
        raise DimMismatch(f"service returned dim {payload['dim']}, backend expects {backend.dim}")
    vectors = payload["vectors"]
    if len(vectors) != len(chunk):
        raise ProtocolError(f"asked for {len(chunk)} vectors, got {len(vectors)}")
    out = []
    for row in vectors:
        vec = np.asarray(row, dtype=np.float64)
        if vec.shape != (backend.dim,):
            raise DimMismatch(f"vector of length {vec.shape}, backend expects {backend.dim}")
        if not np.all(np.isfinite(vec)):
            raise ProtocolError("service returned non-finite values")
        out.append(vec)
    return out


def check_health(endpoint: str, timeout_ms: int = 5000) -> dict:
    url = endpoint.rstrip("/") + "/v1/health"
    try:
        resp = requests.get(url, timeout=timeout_ms / 1000.0)
    except requests.RequestException as exc:
        raise ServiceUnavailable(f"{url}: {exc}") from None
    if resp.status_code != 200:
        raise ServiceUnavailable(f"{url}: HTTP {resp.status_code}: {_error_message(resp)}")
    try:
        return resp.json()
    except ValueError as exc:
        raise ProtocolError(f"malformed health response: {exc}") from None


class EmbeddingCache:
    """On-disk embedding cache keyed by (model id, text content hash).

    One file per model in the embedding-table text format, so cached runs
    can be inspected (or seeded) with ordinary table tools.
    """

    def __init__(self, directory: str, backend: EmbeddingBackendSpec):
        import os

        self.directory = directory
        self.backend = backend
        os.makedirs(directory, exist_ok=True)
        safe = backend.backend_id.replace(":", "_").replace("/", "_")
        self.path = os.path.join(directory, f"{safe}.vec")
        self._vectors: dict[str, np.ndarray] = {}
        self._dirty = False
        if os.path.exists(self.path):
            table = emojikit.load_embedding_table(self.path, name=backend.backend_id)
            if table.dim == backend.dim:
                self._vectors = dict(table.vectors)

    @staticmethod
    def key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:32]

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        missing = [t for t in texts if self.key(t) not in self._vectors]
        # dedupe while preserving first-seen order
        todo = list(dict.fromkeys(missing))
        if todo:
            for text, vec in zip(todo, embed_batch(self.backend, todo)):
                self._vectors[self.key(text)] = vec
            self._dirty = True
        return [self._vectors[self.key(t)] for t in texts]

    def save(self):
        if not self._dirty:
            return
        table = emojikit.EmbeddingTable(dim=self.backend.dim, vectors=self._vectors,
                                        name=self.backend.backend_id)
        emojikit.save_embedding_table(table, self.path)
        self._dirty = False
