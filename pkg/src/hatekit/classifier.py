"""Feature fusion and the trainable classification head.

The feature vector for a post concatenates the sentence embedding of the
cleaned text with three mean-pooled auxiliary blocks (hashtag-segment
words, emoji vectors, emoji-description words) plus one presence-mask bit
per block. On top sits a 2-layer MLP head (dropout -> linear -> ReLU ->
dropout -> linear -> softmax) trained with Adam and cross-entropy over
frozen embeddings. Training is bit-deterministic given (seed, data,
backend): epoch shuffles derive from the seed, and dropout masks come
from a counter-based Philox stream keyed by (seed, epoch, batch).
"""

from __future__ import annotations

import base64
import enum
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import corpus, embedkit, emojikit, hashseg, metrics, textprep
from .corpus import LabeledDataset, Row, Task, labels_for
from .errors import InputError, PipelineError
from .textprep import Language, RawPost

MODEL_FORMAT_VERSION = 1
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
PROB_FLOOR = 1e-12


class DimMismatch(PipelineError):
    pass


class NonFiniteActivation(PipelineError):
    pass


class NonFiniteGradient(PipelineError):
    pass


class EmptyDataset(PipelineError):
    pass


class LabelOutsideVocabulary(PipelineError):
    pass


class Mode(enum.Enum):
    MONO = "mono"
    MULTI = "multi"


@dataclass(frozen=True)
class FusionLayout:
    text_dim: int
    aux_dim: int

    @property
    def total(self) -> int:
        return self.text_dim + 3 * self.aux_dim + 3

    def segment(self, index: int) -> slice:
        """Slice of auxiliary block 0..2 (hashtag, emoji, description)."""
        start = self.text_dim + index * self.aux_dim
        return slice(start, start + self.aux_dim)


@dataclass
class FusedVector:
    values: np.ndarray
    layout: FusionLayout


@dataclass
class HeadConfig:
    hidden_dim: int = 256
    dropout: float = 0.2
    lr: float = 2e-4
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    task: Task = Task.TASK1A
    val_fraction: float = 0.1

    def __post_init__(self):
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class HeadParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def tensors(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "HeadParams":
        return HeadParams(
            W1=self.W1.copy(), b1=self.b1.copy(), W2=self.W2.copy(), b2=self.b2.copy(),
            adam_m={k: v.copy() for k, v in self.adam_m.items()},
            adam_v={k: v.copy() for k, v in self.adam_v.items()},
            step=self.step,
        )


@dataclass
class TrainedModel:
    params: HeadParams
    labels: list[str]
    mode: Mode
    backend_id: str
    history: list[dict]
    config: HeadConfig
    layout: FusionLayout


def init_params(input_dim: int, hidden_dim: int, num_classes: int, seed: int) -> HeadParams:
    rng = np.random.default_rng([seed, 0x1417])
    w1 = rng.standard_normal((hidden_dim, input_dim)) * np.sqrt(2.0 / input_dim)
    w2 = rng.standard_normal((num_classes, hidden_dim)) * np.sqrt(2.0 / hidden_dim)
    params = HeadParams(W1=w1, b1=np.zeros(hidden_dim), W2=w2, b2=np.zeros(num_classes))
    for name, t in params.tensors().items():
        params.adam_m[name] = np.zeros_like(t)
        params.adam_v[name] = np.zeros_like(t)
    return params


# --- fusion ----------------------------------------------------------------

def fuse(text_vec: np.ndarray,
         hashtag_pool: emojikit.PooledVector,
         emoji_pool: emojikit.PooledVector,
         desc_pool: emojikit.PooledVector) -> FusedVector:
    """Concatenate [text | hashtag | emoji | description | mask bits]."""
    pools = (hashtag_pool, emoji_pool, desc_pool)
    aux_dims = {len(p.values) for p in pools}
    if len(aux_dims) != 1:
        raise DimMismatch(f"auxiliary blocks disagree on dim: {sorted(aux_dims)}")
    layout = FusionLayout(text_dim=len(text_vec), aux_dim=aux_dims.pop())
    masks = np.array([1.0 if p.present else 0.0 for p in pools])
    values = np.concatenate([np.asarray(text_vec, dtype=np.float64)]
                            + [np.asarray(p.values, dtype=np.float64) for p in pools]
                            + [masks])
    return FusedVector(values=values, layout=layout)


def _absent(dim: int) -> emojikit.PooledVector:
    return emojikit.PooledVector(values=np.zeros(dim), present=False)


@dataclass
class Featurizer:
    """Everything needed to turn raw posts into fused feature vectors.

    All resources are optional: without a lexicon, hashtags split only on
    forced case/digit boundaries; without a table, the corresponding
    block stays zero with its mask bit off. The ``use_*`` flags ablate
    individual blocks for experiments.
    """

    lexicon: Optional[hashseg.Lexicon] = None
    registry: Optional[emojikit.EmojiRegistry] = None
    word_table: Optional[emojikit.EmbeddingTable] = None
    emoji_table: Optional[emojikit.EmbeddingTable] = None
    aux_dim: int = 8
    use_hashtags: bool = True
    use_emojis: bool = True
    use_descriptions: bool = True
    transliterator: Optional[textprep.Transliterator] = None

    def __post_init__(self):
        dims = {t.dim for t in (self.word_table, self.emoji_table) if t is not None}
        if len(dims) > 1:
            raise DimMismatch(f"word and emoji tables disagree on dim: {sorted(dims)}")
        if dims:
            self.aux_dim = dims.pop()

    def segment_hashtag(self, tag: str) -> list[str]:
        if self.lexicon is not None:
            return hashseg.segment(tag, self.lexicon).tokens
        cuts = hashseg.forced_boundaries(tag)
        bounds = [0] + cuts + [len(tag)]
        return [tag[a:b] for a, b in zip(bounds, bounds[1:])]

    def clean_text(self, post: RawPost) -> textprep.CleanPost:
        try:
            cleaned = textprep.clean(post)
        except textprep.AllContentRemoved as err:
            cleaned = err.result  # keep the row; text embeds as ""
        return cleaned

    def featurize_batch(self, posts: list[RawPost],
                        backend: embedkit.EmbeddingBackendSpec,
                        cache: Optional[embedkit.EmbeddingCache] = None) -> list[FusedVector]:
        cleaned = [self.clean_text(p) for p in posts]
        texts = [" ".join(textprep.prepare_tokens(c, self.transliterator)) for c in cleaned]
        if cache is not None:
            text_vecs = cache.embed(texts)
        else:
            text_vecs = embedkit.embed_batch(backend, texts)
        fused = []
        for c, tv in zip(cleaned, text_vecs):
            fused.append(fuse(tv,
                              self._hashtag_pool(c),
                              self._emoji_pool(c),
                              self._desc_pool(c)))
        return fused

    def featurize(self, post: RawPost, backend: embedkit.EmbeddingBackendSpec) -> FusedVector:
        return self.featurize_batch([post], backend)[0]

    def _hashtag_pool(self, cleaned: textprep.CleanPost) -> emojikit.PooledVector:
        if not (self.use_hashtags and self.word_table and cleaned.entities.hashtags):
            return _absent(self.aux_dim)
        words = []
        for tag in cleaned.entities.hashtags:
            # word tables are lowercase; segments keep source casing
            words.extend(w.casefold() for w in self.segment_hashtag(tag))
        return emojikit.pool(words, self.word_table)

    def _emoji_pool(self, cleaned: textprep.CleanPost) -> emojikit.PooledVector:
        if not (self.use_emojis and self.emoji_table and cleaned.entities.emojis):
            return _absent(self.aux_dim)
        return emojikit.pool(cleaned.entities.emojis, self.emoji_table)

    def _desc_pool(self, cleaned: textprep.CleanPost) -> emojikit.PooledVector:
        if not (self.use_descriptions and self.registry and self.word_table
                and cleaned.entities.emojis):
            return _absent(self.aux_dim)
        words = [w.casefold()
                 for w in emojikit.describe_all(cleaned.entities.emojis, self.registry)]
        return emojikit.pool(words, self.word_table)


def row_to_post(row: Row, fallback_language: Language) -> Optional[RawPost]:
    if not row.text.strip():
        return None
    return RawPost(text=row.text, language=row.language or fallback_language)


def featurize_rows(rows: list[Row], language: Language, featurizer: Featurizer,
                   backend: embedkit.EmbeddingBackendSpec,
                   cache: Optional[embedkit.EmbeddingCache] = None) -> np.ndarray:
    """Feature matrix for a list of rows; blank texts featurize as zeros.

    ``language`` is the fallback for rows that do not carry their own
    language tag (combined multilingual datasets keep per-row tags).
    """
    posts = []
    for row in rows:
        posts.append(row_to_post(row, language))
    live = [p for p in posts if p is not None]
    fused = featurizer.featurize_batch(live, backend, cache) if live else []
    dim = fused[0].layout.total if fused else FusionLayout(backend.dim, featurizer.aux_dim).total
    X = np.zeros((len(rows), dim))
    it = iter(fused)
    for i, post in enumerate(posts):
        if post is not None:
            X[i] = next(it).values
    return X


# --- head forward/backward --------------------------------------------------

def _dropout_rng(seed: int, epoch: int, batch_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[epoch, batch_index, 0, 0]))


def _dropout_mask(rng: np.random.Generator, shape, p: float) -> np.ndarray:
    if p == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= p) / (1.0 - p)


def _forward_batch(params: HeadParams, X: np.ndarray, dropout: float,
                   train_mode: bool, rng: Optional[np.random.Generator]):
    if train_mode and dropout > 0:
        mask0 = _dropout_mask(rng, X.shape, dropout)
    else:
        mask0 = np.ones(X.shape)
    Z0 = X * mask0
    A1 = Z0 @ params.W1.T + params.b1
    H = np.maximum(A1, 0.0)
    if train_mode and dropout > 0:
        mask1 = _dropout_mask(rng, H.shape, dropout)
    else:
        mask1 = np.ones(H.shape)
    Z1 = H * mask1
    logits = Z1 @ params.W2.T + params.b2
    if not np.all(np.isfinite(logits)):
        raise NonFiniteActivation("non-finite logits in forward pass")
    shifted = logits - logits.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    probs = expv / expv.sum(axis=1, keepdims=True)
    return probs, (Z0, A1, Z1, mask0, mask1)


def forward(params: HeadParams, fused: FusedVector, train_mode: bool = False,
            rng: Optional[np.random.Generator] = None,
            dropout: float = 0.0) -> np.ndarray:
    """Class probabilities for one fused vector (dropout only in train mode)."""
    probs, _ = _forward_batch(params, fused.values[None, :], dropout, train_mode, rng)
    return probs[0]


def loss(probs: np.ndarray, gold_index: int) -> float:
    """Cross-entropy of the gold class, clamped at PROB_FLOOR."""
    return float(-np.log(max(float(probs[gold_index]), PROB_FLOOR)))


def batch_loss(params: HeadParams, X: np.ndarray, y: np.ndarray, dropout: float,
               train_mode: bool, rng_key: Optional[tuple[int, int, int]] = None) -> float:
    """Mean cross-entropy of a batch; ``rng_key=(seed, epoch, batch)`` fixes
    the dropout masks, which makes the value differentiable-by-finite-
    differences in the parameters."""
    rng = _dropout_rng(*rng_key) if rng_key else None
    probs, _ = _forward_batch(params, X, dropout, train_mode, rng)
    picked = np.clip(probs[np.arange(len(y)), y], PROB_FLOOR, None)
    return float(-np.log(picked).mean())


def gradients(params: HeadParams, X: np.ndarray, y: np.ndarray, dropout: float,
              train_mode: bool, rng_key: Optional[tuple[int, int, int]] = None):
    """Analytic gradients of :func:`batch_loss` w.r.t. every parameter."""
    rng = _dropout_rng(*rng_key) if rng_key else None
    probs, (Z0, A1, Z1, mask0, mask1) = _forward_batch(params, X, dropout, train_mode, rng)
    n = len(y)
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    grads = {
        "W2": dlogits.T @ Z1,
        "b2": dlogits.sum(axis=0),
    }
    dZ1 = dlogits @ params.W2
    dA1 = dZ1 * mask1 * (A1 > 0)
    grads["W1"] = dA1.T @ Z0
    grads["b1"] = dA1.sum(axis=0)
    picked = np.clip(probs[np.arange(n), y], PROB_FLOOR, None)
    value = float(-np.log(picked).mean())
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient("non-finite gradient")
    return value, grads


def adam_update(params: HeadParams, grads: dict[str, np.ndarray], lr: float):
    params.step += 1
    t = params.step
    for name, tensor in params.tensors().items():
        g = grads[name]
        m = params.adam_m[name]
        v = params.adam_v[name]
        m[:] = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
        v[:] = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g * g
        m_hat = m / (1 - ADAM_BETA1 ** t)
        v_hat = v / (1 - ADAM_BETA2 ** t)
        tensor -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def train_step(params: HeadParams, minibatch: list[tuple[FusedVector, int]],
               config: HeadConfig, rng_key: tuple[int, int, int]) -> tuple[HeadParams, float]:
    """One optimizer step over a minibatch of (fused vector, gold index)."""
    X = np.stack([fv.values for fv, _ in minibatch])
    y = np.array([gold for _, gold in minibatch])
    value, grads = gradients(params, X, y, config.dropout, True, rng_key)
    adam_update(params, grads, config.lr)
    return params, value


# --- training loop -----------------------------------------------------------

def _gold_indices(rows: list[Row], task: Task, labels: list[str]) -> np.ndarray:
    index = {label: i for i, label in enumerate(labels)}
    out = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        label = row.label(task)
        if label not in index:
            raise LabelOutsideVocabulary(
                f"row {row.tweet_id}: label {label!r} not in {labels} "
                f"(is this a task-{task.value} dataset?)")
        out[i] = index[label]
    return out


def train(datasets: list[LabeledDataset], mode: Mode, config: HeadConfig,
          backend: embedkit.EmbeddingBackendSpec, tables: Featurizer,
          cache: Optional[embedkit.EmbeddingCache] = None) -> TrainedModel:
    """Train the head on one dataset (MONO) or the concatenation (MULTI).

    Each epoch runs shuffled minibatches and evaluates validation macro-F1;
    the best-epoch parameters are kept and training stops early after
    ``patience`` epochs without improvement.
    """
    if mode is Mode.MONO and len(datasets) != 1:
        raise ValueError("MONO training takes exactly one dataset")
    if mode is Mode.MULTI:
        data = corpus.combine(datasets)
        order = np.random.default_rng([config.seed, 0xC0B1]).permutation(len(data.rows))
        data = LabeledDataset(data.language, [data.rows[int(i)] for i in order],
                              data.provenance + [f"shuffle seed={config.seed}"])
    else:
        data = datasets[0]
    if not data.rows:
        raise EmptyDataset("no rows to train on")

    labels = labels_for(config.task)
    _gold_indices(data.rows, config.task, labels)  # validate before any work
    train_ds, val_ds = corpus.split(data, config.val_fraction, config.seed, config.task)
    if not train_ds.rows or not val_ds.rows:
        raise EmptyDataset("dataset too small to carve out a validation split")

    X_train = featurize_rows(train_ds.rows, train_ds.language, tables, backend, cache)
    y_train = _gold_indices(train_ds.rows, config.task, labels)
    X_val = featurize_rows(val_ds.rows, val_ds.language, tables, backend, cache)
    y_val = _gold_indices(val_ds.rows, config.task, labels)
    val_golds = [labels[i] for i in y_val]

    params = init_params(X_train.shape[1], config.hidden_dim, len(labels), config.seed)
    layout = FusionLayout(text_dim=backend.dim, aux_dim=tables.aux_dim)

    history: list[dict] = []
    best = params.copy()
    best_f1 = -1.0
    best_loss = np.inf
    stale = 0
    n = len(train_ds.rows)
    for epoch in range(config.max_epochs):
        order = np.random.default_rng([config.seed, 0xE90C, epoch]).permutation(n)
        losses = []
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            value, grads = gradients(params, X_train[idx], y_train[idx],
                                     config.dropout, True,
                                     (config.seed, epoch, batch_index))
            adam_update(params, grads, config.lr)
            losses.append(value)
        train_loss = float(np.mean(losses))
        probs, _ = _forward_batch(params, X_val, 0.0, False, None)
        preds = [labels[i] for i in probs.argmax(axis=1)]
        f1 = metrics.macro_f1(metrics.confusion(val_golds, preds, labels))
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_macro_f1": f1, "steps": len(losses)})
        # keep the best validation epoch; exact ties go to the epoch that
        # fits the training data better (small val sets saturate early)
        if f1 > best_f1 or (f1 == best_f1 and train_loss < best_loss):
            best = params.copy()
            best_loss = min(best_loss, train_loss)
        if f1 > best_f1:
            best_f1 = f1
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    return TrainedModel(params=best, labels=labels, mode=mode,
                        backend_id=backend.backend_id, history=history,
                        config=config, layout=layout)


def _check_compatible(model: TrainedModel, backend: embedkit.EmbeddingBackendSpec,
                      tables: Featurizer):
    if backend.backend_id != model.backend_id:
        raise InputError(f"model was trained with backend {model.backend_id}, "
                         f"got {backend.backend_id}")
    if tables.aux_dim != model.layout.aux_dim:
        raise InputError(
            f"featurizer aux_dim {tables.aux_dim} does not match the model's "
            f"{model.layout.aux_dim}; supply the same tables (or --aux-dim) "
            f"used at training time")


def predict(model: TrainedModel, post: RawPost,
            backend: embedkit.EmbeddingBackendSpec,
            tables: Featurizer) -> tuple[str, np.ndarray]:
    """Eval-mode argmax label (ties resolve to the lowest label index)."""
    _check_compatible(model, backend, tables)
    fused = tables.featurize(post, backend)
    probs = forward(model.params, fused, train_mode=False)
    return model.labels[int(np.argmax(probs))], probs


def predict_rows(model: TrainedModel, rows: list[Row], language: Language,
                 backend: embedkit.EmbeddingBackendSpec, tables: Featurizer,
                 cache: Optional[embedkit.EmbeddingCache] = None) -> tuple[list[str], np.ndarray]:
    """Batch inference: (labels, probability matrix) for a list of rows."""
    _check_compatible(model, backend, tables)
    X = featurize_rows(rows, language, tables, backend, cache)
    probs, _ = _forward_batch(model.params, X, 0.0, False, None)
    return [model.labels[i] for i in probs.argmax(axis=1)], probs


def evaluate_dataset(model: TrainedModel, dataset: LabeledDataset,
                     backend: embedkit.EmbeddingBackendSpec, tables: Featurizer,
                     cache: Optional[embedkit.EmbeddingCache] = None) -> tuple[list[str], list[str]]:
    """(golds, preds) over a labeled dataset, for reporting."""
    _check_compatible(model, backend, tables)
    y = _gold_indices(dataset.rows, model.config.task, model.labels)
    X = featurize_rows(dataset.rows, dataset.language, tables, backend, cache)
    probs, _ = _forward_batch(model.params, X, 0.0, False, None)
    preds = [model.labels[i] for i in probs.argmax(axis=1)]
    golds = [model.labels[i] for i in y]
    return golds, preds


# --- serialization -----------------------------------------------------------

def _tensor_to_json(t: np.ndarray) -> dict:
    return {"shape": list(t.shape),
            "data": base64.b64encode(np.ascontiguousarray(t, dtype="<f8").tobytes()).decode("ascii")}


def _tensor_from_json(obj: dict) -> np.ndarray:
    flat = np.frombuffer(base64.b64decode(obj["data"]), dtype="<f8")
    return flat.reshape(obj["shape"]).copy()


def save_model(model: TrainedModel, path: str):
    """Self-describing JSON model file; tensors as little-endian base64."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "labels": model.labels,
        "mode": model.mode.value,
        "backend_id": model.backend_id,
        "layout": {"text_dim": model.layout.text_dim, "aux_dim": model.layout.aux_dim},
        "config": {
            "hidden_dim": model.config.hidden_dim,
            "dropout": model.config.dropout,
            "lr": model.config.lr,
            "batch_size": model.config.batch_size,
            "max_epochs": model.config.max_epochs,
            "patience": model.config.patience,
            "seed": model.config.seed,
            "task": model.config.task.value,
            "val_fraction": model.config.val_fraction,
        },
        "params": {name: _tensor_to_json(t) for name, t in model.params.tensors().items()},
        "history": model.history,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path: str) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise InputError(f"{path}: unsupported model format {doc.get('format_version')!r}")
    cfg = doc["config"]
    config = HeadConfig(hidden_dim=cfg["hidden_dim"], dropout=cfg["dropout"], lr=cfg["lr"],
                        batch_size=cfg["batch_size"], max_epochs=cfg["max_epochs"],
                        patience=cfg["patience"], seed=cfg["seed"],
                        task=Task(cfg["task"]), val_fraction=cfg["val_fraction"])
    params = HeadParams(W1=_tensor_from_json(doc["params"]["W1"]),
                        b1=_tensor_from_json(doc["params"]["b1"]),
                        W2=_tensor_from_json(doc["params"]["W2"]),
                        b2=_tensor_from_json(doc["params"]["b2"]))
    layout = FusionLayout(text_dim=doc["layout"]["text_dim"], aux_dim=doc["layout"]["aux_dim"])
    return TrainedModel(params=params, labels=list(doc["labels"]), mode=Mode(doc["mode"]),
                        backend_id=doc["backend_id"], history=list(doc["history"]),
                        config=config, layout=layout)
