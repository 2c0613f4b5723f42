"""HASOC-style dataset ingestion, class statistics, splits, and resampling.

Input files are RFC-4180 CSV (or TSV; the delimiter is sniffed from the
header line) with columns hasoc_id/_id, tweet_id, text, task_1, and
optionally task_2. Marathi files carry no task_2 column; rows then have
``task_2=None``.
"""

from __future__ import annotations

import csv
import enum
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError, PipelineError
from .textprep import Language

TASK1_LABELS = ("NOT", "HOF")
TASK2_LABELS = ("NONE", "HATE", "OFFN", "PRFN")


class Task(enum.Enum):
    TASK1A = "1a"
    TASK1B = "1b"


def labels_for(task: Task) -> list[str]:
    return list(TASK1_LABELS) if task is Task.TASK1A else list(TASK2_LABELS)


class MissingColumn(InputError):
    pass


class BadLabel(InputError):
    def __init__(self, path: str, row_no: int, message: str):
        super().__init__(f"{path}:row {row_no}: {message}")
        self.row_no = row_no


class EncodingError(InputError):
    pass


class DegenerateClass(PipelineError):
    pass


class ClassTooSmall(UserWarning):
    """A label with < 2 rows cannot stratify; the split falls back to unstratified."""


@dataclass(frozen=True)
class Row:
    hasoc_id: str
    tweet_id: str
    text: str
    task_1: str
    task_2: Optional[str] = None
    # original language, kept through combine() so multilingual training can
    # still apply per-language script handling
    language: Optional[Language] = None

    def label(self, task: Task) -> Optional[str]:
        return self.task_1 if task is Task.TASK1A else self.task_2


@dataclass
class LabeledDataset:
    language: Language
    rows: list[Row]
    provenance: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class ClassStats:
    task1: dict[str, int]
    task2: dict[str, int]
    total: int


_ALIASES = {"hasoc_id": ("hasoc_id", "_id"), "tweet_id": ("tweet_id",),
            "text": ("text",), "task_1": ("task_1",), "task_2": ("task_2",)}


def load_dataset(path: str, language: Language,
                 aliases: Optional[dict[str, tuple[str, ...]]] = None) -> LabeledDataset:
    """Parse a labeled CSV/TSV; unknown extra columns are ignored."""
    aliases = {**_ALIASES, **(aliases or {})}
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            header_line = fh.readline()
            if not header_line:
                raise MissingColumn(f"{path}: empty file")
            delimiter = "\t" if "\t" in header_line else ","
            fh.seek(0)
            reader = csv.DictReader(fh, delimiter=delimiter)
            fields = reader.fieldnames or []
            col = {}
            for canonical, names in aliases.items():
                col[canonical] = next((n for n in names if n in fields), None)
            for required in ("hasoc_id", "tweet_id", "text", "task_1"):
                if col[required] is None:
                    raise MissingColumn(f"{path}: missing column {required!r} (header: {fields})")
            rows = []
            for row_no, rec in enumerate(reader, start=2):
                rows.append(_parse_row(path, row_no, rec, col, language))
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{path}: not valid UTF-8 ({exc})") from None

    ids = [r.tweet_id for r in rows]
    if len(set(ids)) != len(ids):
        warnings.warn(f"{path}: duplicate tweet_ids present", UserWarning, stacklevel=2)
    return LabeledDataset(language=language, rows=rows,
                          provenance=[f"{path} [delimiter={'tab' if delimiter == chr(9) else 'comma'}]"])


def _parse_row(path: str, row_no: int, rec: dict, col: dict,
               language: Language) -> Row:
    task_1 = (rec.get(col["task_1"]) or "").strip()
    if task_1 not in TASK1_LABELS:
        raise BadLabel(path, row_no, f"task_1={task_1!r} not in {TASK1_LABELS}")
    task_2: Optional[str] = None
    if col["task_2"] is not None:
        raw = (rec.get(col["task_2"]) or "").strip()
        if raw:
            if raw not in TASK2_LABELS:
                raise BadLabel(path, row_no, f"task_2={raw!r} not in {TASK2_LABELS}")
            task_2 = raw
    if task_1 == "NOT" and task_2 not in (None, "NONE"):
        raise BadLabel(path, row_no, f"task_1=NOT but task_2={task_2!r}")
    hasoc_id = (rec.get(col["hasoc_id"]) or "").strip()
    tweet_id = (rec.get(col["tweet_id"]) or "").strip()
    if not hasoc_id or not tweet_id:
        raise BadLabel(path, row_no, "empty id field")
    return Row(hasoc_id=hasoc_id, tweet_id=tweet_id,
               text=rec.get(col["text"]) or "", task_1=task_1, task_2=task_2,
               language=language)


def save_dataset(dataset: LabeledDataset, path: str):
    """Re-serialize in the input format (comma-delimited)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hasoc_id", "tweet_id", "text", "task_1", "task_2"])
        for r in dataset.rows:
            writer.writerow([r.hasoc_id, r.tweet_id, r.text, r.task_1, r.task_2 or ""])


def class_stats(dataset: LabeledDataset) -> ClassStats:
    task1 = {label: 0 for label in TASK1_LABELS}
    task2 = {label: 0 for label in TASK2_LABELS}
    for r in dataset.rows:
        task1[r.task_1] += 1
        if r.task_2 is not None:
            task2[r.task_2] += 1
    return ClassStats(task1=task1, task2=task2, total=len(dataset.rows))


def split(dataset: LabeledDataset, val_fraction: float, seed: int,
          task: Task = Task.TASK1A) -> tuple[LabeledDataset, LabeledDataset]:
    """Deterministic stratified split into (train, val).

    Stratifies on the task label; a label with fewer than 2 rows triggers
    a ClassTooSmall warning and an unstratified fallback. Row order within
    each part follows the input dataset.
    """
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must be in (0, 1)")
    n = len(dataset.rows)
    rng = np.random.default_rng([seed, 0x5EED])
    groups: dict[Optional[str], list[int]] = {}
    for i, r in enumerate(dataset.rows):
        groups.setdefault(r.label(task), []).append(i)

    if any(len(g) < 2 for g in groups.values()):
        warnings.warn(ClassTooSmall("a class has < 2 rows; splitting unstratified"),
                      stacklevel=2)
        order = rng.permutation(n)
        n_val = int(round(n * val_fraction))
        val_idx = set(int(i) for i in order[:n_val])
    else:
        val_idx = set()
        for label in sorted(groups, key=str):
            g = groups[label]
            order = rng.permutation(len(g))
            n_val = int(round(len(g) * val_fraction))
            n_val = min(n_val, len(g) - 1)  # keep at least one row in train
            val_idx.update(g[int(k)] for k in order[:n_val])

    train_rows = [r for i, r in enumerate(dataset.rows) if i not in val_idx]
    val_rows = [r for i, r in enumerate(dataset.rows) if i in val_idx]
    prov = dataset.provenance
    return (LabeledDataset(dataset.language, train_rows, prov + [f"split:train seed={seed}"]),
            LabeledDataset(dataset.language, val_rows, prov + [f"split:val seed={seed}"]))


def combine(datasets: list[LabeledDataset]) -> LabeledDataset:
    """Concatenate datasets for joint multilingual training."""
    if not datasets:
        raise ValueError("combine needs at least one dataset")
    if len(datasets) == 1:
        return datasets[0]
    rows: list[Row] = []
    prov: list[str] = []
    for d in datasets:
        rows.extend(d.rows)
        prov.extend(d.provenance)
    return LabeledDataset(language=Language.MULTI, rows=rows, provenance=prov)


def soup_resample(dataset: LabeledDataset, task: Task,
                  embed_fn: Callable[[str], np.ndarray], seed: int) -> LabeledDataset:
    """Similarity-based over/undersampling to equalize class sizes.

    Every class is brought to the rounded mean of the class counts.
    Minority classes are oversampled by duplicating rows in descending
    cosine-similarity-to-class-centroid order, cycling as needed. Majority
    classes are undersampled by repeatedly finding the most similar
    within-class pair and dropping its less-central member. Disabled by
    default in training configs: on the real data it costs accuracy.
    """
    labels = labels_for(task)
    groups: dict[str, list[int]] = {label: [] for label in labels}
    for i, r in enumerate(dataset.rows):
        label = r.label(task)
        if label is None:
            raise DegenerateClass(f"row {r.tweet_id} has no {task.value} label")
        groups[label].append(i)
    for label, g in groups.items():
        if not g:
            raise DegenerateClass(f"class {label} has 0 rows")

    target = int(round(sum(len(g) for g in groups.values()) / len(groups)))
    vectors = np.stack([np.asarray(embed_fn(r.text), dtype=np.float64) for r in dataset.rows])
    perm = np.random.default_rng([seed, 0x50FA]).permutation(len(dataset.rows))

    keep = [True] * len(dataset.rows)
    extras: list[Row] = []
    for label in labels:
        g = groups[label]
        vecs = vectors[g]
        centroid = vecs.mean(axis=0)
        to_centroid = np.array([_cosine(v, centroid) for v in vecs])
        if len(g) < target:
            order = sorted(range(len(g)), key=lambda k: (-to_centroid[k], perm[g[k]]))
            for j in range(target - len(g)):
                extras.append(dataset.rows[g[order[j % len(g)]]])
        elif len(g) > target:
            sim = _pairwise_cosine(vecs)
            np.fill_diagonal(sim, -np.inf)
            for _ in range(len(g) - target):
                i_best, j_best = divmod(int(np.argmax(sim)), sim.shape[1])
                # drop the pair member that sits farther from the centroid
                ki = (to_centroid[i_best], -perm[g[i_best]])
                kj = (to_centroid[j_best], -perm[g[j_best]])
                drop = i_best if ki <= kj else j_best
                sim[drop, :] = -np.inf
                sim[:, drop] = -np.inf
                keep[g[drop]] = False
    rows = [r for i, r in enumerate(dataset.rows) if keep[i]] + extras
    return LabeledDataset(language=dataset.language, rows=rows,
                          provenance=dataset.provenance + [f"soup:{task.value} seed={seed}"])


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def _pairwise_cosine(vecs: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vecs, axis=1)
    safe = np.where(norms == 0, 1.0, norms)
    unit = vecs / safe[:, None]
    unit[norms == 0] = 0.0
    return unit @ unit.T
