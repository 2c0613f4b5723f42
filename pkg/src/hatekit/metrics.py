"""Confusion matrices, per-class P/R/F1, macro-F1, and the comparison report.

Macro-F1 averages over the declared label vocabulary (not just labels
observed in the data) so that reports stay comparable across languages;
any precision, recall, or F1 with a zero denominator contributes 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PipelineError


class LengthMismatch(PipelineError):
    pass


class UnknownLabel(PipelineError):
    pass


@dataclass
class ConfusionMatrix:
    labels: list[str]
    counts: np.ndarray  # rows = gold, cols = predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class EvalReport:
    labels: list[str]
    per_class: dict[str, tuple[float, float, float]]  # label -> (P, R, F1)
    macro_f1: float
    accuracy: float
    model: str = ""
    mode: str = ""
    backend: str = ""
    task: str = ""
    language: str = ""


def confusion(golds: list[str], preds: list[str], labels: list[str]) -> ConfusionMatrix:
    if len(golds) != len(preds):
        raise LengthMismatch(f"{len(golds)} golds vs {len(preds)} preds")
    index = {label: i for i, label in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for g, p in zip(golds, preds):
        if g not in index:
            raise UnknownLabel(f"gold label {g!r} not in vocabulary {labels}")
        if p not in index:
            raise UnknownLabel(f"predicted label {p!r} not in vocabulary {labels}")
        counts[index[g], index[p]] += 1
    return ConfusionMatrix(labels=list(labels), counts=counts)


def per_class_prf(matrix: ConfusionMatrix) -> dict[str, tuple[float, float, float]]:
    """(precision, recall, F1) per class, with 0 for zero denominators."""
    out = {}
    for i, label in enumerate(matrix.labels):
        tp = int(matrix.counts[i, i])
        fp = int(matrix.counts[:, i].sum()) - tp
        fn = int(matrix.counts[i, :].sum()) - tp
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        out[label] = (p, r, f1)
    return out


def macro_f1(matrix: ConfusionMatrix) -> float:
    """Unweighted mean F1 over every label in the vocabulary."""
    prf = per_class_prf(matrix)
    return sum(f1 for _, _, f1 in prf.values()) / len(matrix.labels)


def accuracy(matrix: ConfusionMatrix) -> float:
    total = matrix.total
    return float(np.trace(matrix.counts)) / total if total else 0.0


def evaluate(golds: list[str], preds: list[str], labels: list[str], *,
             model: str = "", mode: str = "", backend: str = "",
             task: str = "", language: str = "") -> EvalReport:
    matrix = confusion(golds, preds, labels)
    return EvalReport(labels=list(labels), per_class=per_class_prf(matrix),
                      macro_f1=macro_f1(matrix), accuracy=accuracy(matrix),
                      model=model, mode=mode, backend=backend, task=task,
                      language=language)


@dataclass
class ReportGrid:
    """mono/multi x model rows against language/task columns."""
    row_names: list[str]
    col_names: list[str]
    cells: list[list[Optional[EvalReport]]]
    best_per_col: list[Optional[int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.best_per_col:
            self.best_per_col = []
            for c in range(len(self.col_names)):
                scores = [(r, self.cells[r][c].macro_f1)
                          for r in range(len(self.row_names)) if self.cells[r][c]]
                self.best_per_col.append(max(scores, key=lambda t: t[1])[0] if scores else None)


def report(models: list, test_sets: list, backend, tables) -> ReportGrid:
    """Evaluate every model on every compatible test set (Table-style grid).

    ``models`` are TrainedModel instances; ``test_sets`` are LabeledDataset
    instances. A model/test pair is compatible when the test set provides
    the model's task labels. Incompatible cells stay empty.
    """
    from . import classifier  # local import: classifier depends on this module

    row_names = [f"{m.backend_id} [{m.mode.value}]" for m in models]
    col_names = [ds.language.value for ds in test_sets]
    cells: list[list[Optional[EvalReport]]] = []
    for m in models:
        row = []
        for ds in test_sets:
            try:
                golds, preds = classifier.evaluate_dataset(m, ds, backend, tables)
            except PipelineError:
                row.append(None)
                continue
            row.append(evaluate(golds, preds, m.labels,
                                model=m.backend_id, mode=m.mode.value,
                                backend=m.backend_id, task=m.config.task.value,
                                language=ds.language.value))
        cells.append(row)
    return ReportGrid(row_names=row_names, col_names=col_names, cells=cells)


def render_text(grid: ReportGrid) -> str:
    """Aligned text table of macro-F1 scores; best cell per column starred."""
    width = max([len(n) for n in grid.row_names] + [5]) + 2
    colw = max([len(c) for c in grid.col_names] + [8]) + 2
    lines = [" " * width + "".join(c.rjust(colw) for c in grid.col_names)]
    for r, name in enumerate(grid.row_names):
        cells = []
        for c in range(len(grid.col_names)):
            rep = grid.cells[r][c]
            if rep is None:
                cells.append("-".rjust(colw))
            else:
                star = "*" if grid.best_per_col[c] == r else " "
                cells.append(f"{rep.macro_f1:.4f}{star}".rjust(colw))
        lines.append(name.ljust(width) + "".join(cells))
    return "\n".join(lines)


def render_csv(grid: ReportGrid) -> str:
    """CSV rows: model, mode, language, task, macro_f1, accuracy, then
    per-class P/R/F1 triples."""
    import csv as _csv
    import io

    buf = io.StringIO()
    writer = _csv.writer(buf)
    all_labels: list[str] = []
    for row in grid.cells:
        for rep in row:
            if rep is not None:
                all_labels = rep.labels
                break
        if all_labels:
            break
    header = ["model", "mode", "language", "task", "macro_f1", "accuracy"]
    for label in all_labels:
        header += [f"{label}_precision", f"{label}_recall", f"{label}_f1"]
    writer.writerow(header)
    for r in range(len(grid.row_names)):
        for c in range(len(grid.col_names)):
            rep = grid.cells[r][c]
            if rep is None:
                continue
            record = [rep.model, rep.mode, rep.language, rep.task,
                      f"{rep.macro_f1:.6f}", f"{rep.accuracy:.6f}"]
            for label in rep.labels:
                p, rc, f1 = rep.per_class[label]
                record += [f"{p:.6f}", f"{rc:.6f}", f"{f1:.6f}"]
            writer.writerow(record)
    return buf.getvalue()
