"""Sentence encoders behind the embedding service.

Two backends per model slot:

* ``hf`` — a HuggingFace transformer, mean-pooling the last hidden layer
  over non-padding tokens. Weights load lazily (they are large) and
  inference runs in eval mode under no_grad, so identical requests yield
  identical vectors.
* ``hash`` — a deterministic token-hash encoder with no model weights,
  for offline tests and environments without checkpoint access.
"""

from __future__ import annotations

import hashlib
import threading

import numpy as np

# served model id -> HuggingFace checkpoint
CHECKPOINTS = {
    "xlmr": "xlm-roberta-base",
    "mbert": "bert-base-multilingual-uncased",
    "distilmbert": "distilbert-base-multilingual-cased",
}


class EncoderError(RuntimeError):
    pass


class HashEncoder:
    """Deterministic stand-in encoder: token hash -> PRNG vector, mean-pooled."""

    def __init__(self, model_id: str, dim: int = 64):
        self.model_id = model_id
        self.dim = dim

    def load(self):
        pass  # nothing to load

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            tokens = text.split()
            if not tokens:
                continue
            acc = np.zeros(self.dim)
            for tok in tokens:
                digest = hashlib.blake2b(f"{self.model_id}\x00{tok}".encode("utf-8"),
                                         digest_size=8).digest()
                rng = np.random.default_rng(int.from_bytes(digest, "little"))
                acc = acc + rng.standard_normal(self.dim)
            vec = acc / len(tokens)
            norm = np.linalg.norm(vec)
            out[i] = vec / norm if norm > 0 else vec
        return out


class TransformerEncoder:
    """Mean-pooled last-layer states of a pretrained multilingual encoder."""

    def __init__(self, model_id: str, device: str = "cpu"):
        if model_id not in CHECKPOINTS:
            raise EncoderError(f"no checkpoint known for {model_id!r}")
        self.model_id = model_id
        self.checkpoint = CHECKPOINTS[model_id]
        self.device = device
        self.dim = 0
        self._model = None
        self._tokenizer = None

    def load(self):
        try:
            import torch  # noqa: F401
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise EncoderError(f"transformers backend unavailable: {exc}") from None
        self._tokenizer = AutoTokenizer.from_pretrained(self.checkpoint)
        self._model = AutoModel.from_pretrained(self.checkpoint)
        self._model.eval()
        self._model.to(self.device)
        self.dim = int(self._model.config.hidden_size)

    def encode(self, texts: list[str]) -> np.ndarray:
        import torch

        if self._model is None:
            raise EncoderError("encoder not loaded")
        if not texts:
            return np.zeros((0, self.dim))
        batch = self._tokenizer(texts, padding=True, truncation=True,
                                max_length=256, return_tensors="pt").to(self.device)
        with torch.no_grad():
            states = self._model(**batch).last_hidden_state
        mask = batch["attention_mask"].unsqueeze(-1).to(states.dtype)
        summed = (states * mask).sum(dim=1)
        counts = mask.sum(dim=1).clamp(min=1)
        return (summed / counts).cpu().numpy().astype(np.float64)


def make_encoder(model_id: str, backend: str, hash_dim: int, device: str):
    if backend == "hash":
        return HashEncoder(model_id, dim=hash_dim)
    if backend == "hf":
        return TransformerEncoder(model_id, device=device)
    raise EncoderError(f"unknown encoder backend {backend!r} (use hf or hash)")


class ModelSlot:
    """One served model: encoder plus load state; inference is serialized."""

    def __init__(self, model_id: str, encoder, max_batch: int):
        self.model_id = model_id
        self.encoder = encoder
        self.max_batch = max_batch
        self.loaded = False
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self.encoder.dim

    def ensure_loaded(self):
        with self._lock:
            if not self.loaded:
                self.encoder.load()
                self.loaded = True

    def encode(self, texts: list[str]) -> np.ndarray:
        self.ensure_loaded()
        with self._lock:
            return self.encoder.encode(texts)
