"""FastAPI app exposing the embedding wire protocol.

Endpoints:
    POST /v1/embed   {"model": "<id>", "texts": [...]}
        -> 200 {"model": "<id>", "dim": N, "vectors": [[...], ...]}
        -> 404 unknown model, 413 oversized batch, 503 while loading,
           all as {"error": "<message>"}
    GET  /v1/health  -> 200 {"status": "ok", "models": [...], "dims": {...}}
                        or 503 while nothing is loaded yet

Configuration comes from the environment:
    ES_PORT       listen port for __main__ (default 8601)
    ES_MODELS     comma list of model ids, each optionally id:backend with
                  backend in {hf, hash} (default hf), e.g. "xlmr,mbert:hash"
    ES_MAX_BATCH  maximum texts per request (default 64)
    ES_DEVICE     torch device for hf encoders (default cpu)
    ES_HASH_DIM   dimension of hash encoders (default 64)
    ES_EAGER      "1" to load every model at startup (default: lazy)
"""

from __future__ import annotations

import os
from contextlib import asynccontextmanager
from dataclasses import dataclass, field

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from .encoders import EncoderError, ModelSlot, make_encoder


@dataclass
class Settings:
    models: list[tuple[str, str]] = field(default_factory=lambda: [("xlmr", "hf")])
    max_batch: int = 64
    device: str = "cpu"
    hash_dim: int = 64
    eager: bool = False

    @classmethod
    def from_env(cls) -> "Settings":
        models = []
        for item in os.environ.get("ES_MODELS", "xlmr").split(","):
            item = item.strip()
            if not item:
                continue
            model_id, _, backend = item.partition(":")
            models.append((model_id, backend or "hf"))
        return cls(models=models,
                   max_batch=int(os.environ.get("ES_MAX_BATCH", "64")),
                   device=os.environ.get("ES_DEVICE", "cpu"),
                   hash_dim=int(os.environ.get("ES_HASH_DIM", "64")),
                   eager=os.environ.get("ES_EAGER", "") == "1")


class EmbedRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: str
    texts: list[str]


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(settings: Settings | None = None) -> FastAPI:
    settings = settings or Settings.from_env()
    slots: dict[str, ModelSlot] = {}
    for model_id, backend in settings.models:
        encoder = make_encoder(model_id, backend, settings.hash_dim, settings.device)
        slots[model_id] = ModelSlot(model_id, encoder, settings.max_batch)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        if settings.eager:
            for slot in slots.values():
                slot.ensure_loaded()
        yield

    app = FastAPI(title="embed-service", lifespan=lifespan)
    app.state.slots = slots

    @app.get("/v1/health")
    def health():
        loaded = [s for s in slots.values() if s.loaded]
        if not loaded:
            return _error(503, "no model loaded yet")
        return {"status": "ok",
                "models": [s.model_id for s in loaded],
                "dims": {s.model_id: s.dim for s in loaded},
                "max_batch": settings.max_batch}

    @app.post("/v1/embed")
    def embed(req: EmbedRequest):
        slot = slots.get(req.model)
        if slot is None:
            return _error(404, f"unknown model {req.model!r}")
        if len(req.texts) > slot.max_batch:
            return _error(413, f"batch of {len(req.texts)} exceeds max_batch {slot.max_batch}")
        try:
            vectors = slot.encode(req.texts)
        except EncoderError as exc:
            return _error(503, str(exc))
        return {"model": slot.model_id, "dim": slot.dim,
                "vectors": [row.tolist() for row in vectors]}

    return app


app = create_app()
