import random

import numpy as np
import pytest

from hatekit import metrics
from hatekit.metrics import (
    EvalReport, LengthMismatch, ReportGrid, UnknownLabel,
    accuracy, confusion, evaluate, macro_f1, per_class_prf, render_csv, render_text,
)


class TestConfusion:
    def test_diagonal(self):
        m = confusion(["HOF", "NOT"], ["HOF", "NOT"], ["NOT", "HOF"])
        assert np.array_equal(m.counts, [[1, 0], [0, 1]])

    def test_off_diagonal(self):
        m = confusion(["HOF"], ["NOT"], ["NOT", "HOF"])
        # rows = gold, cols = predicted
        assert m.counts[1, 0] == 1
        assert m.total == 1

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion(["HOF"], [], ["NOT", "HOF"])

    def test_unknown_label(self):
        with pytest.raises(UnknownLabel):
            confusion(["WAT"], ["HOF"], ["NOT", "HOF"])
        with pytest.raises(UnknownLabel):
            confusion(["HOF"], ["WAT"], ["NOT", "HOF"])


class TestMacroF1:
    def test_perfect_is_one(self):
        golds = ["a", "b", "c", "a", "b", "c"]
        m = confusion(golds, golds, ["a", "b", "c"])
        assert macro_f1(m) == 1.0

    def test_hand_derived_two_thirds_case(self):
        golds = ["1", "1", "0", "0"]
        preds = ["1", "0", "0", "0"]
        m = confusion(golds, preds, ["0", "1"])
        # class 1: P=1, R=1/2, F1=2/3; class 0: P=2/3, R=1, F1=4/5
        assert macro_f1(m) == pytest.approx(0.733333, abs=1e-6)

    def test_no_true_positives_is_zero(self):
        m = confusion(["1", "0"], ["0", "1"], ["0", "1"])
        assert macro_f1(m) == 0.0

    def test_absent_vocabulary_class_drags_average(self):
        m = confusion(["a", "a"], ["a", "a"], ["a", "b"])
        assert macro_f1(m) == pytest.approx(0.5)

    def test_bounded(self):
        rng = random.Random(11)
        labels = ["w", "x", "y", "z"]
        for _ in range(100):
            golds = [rng.choice(labels) for _ in range(30)]
            preds = [rng.choice(labels) for _ in range(30)]
            value = macro_f1(confusion(golds, preds, labels))
            assert 0.0 <= value <= 1.0

    def test_permutation_invariance(self):
        rng = random.Random(13)
        labels = ["a", "b"]
        pairs = [(rng.choice(labels), rng.choice(labels)) for _ in range(40)]
        golds, preds = zip(*pairs)
        base = macro_f1(confusion(list(golds), list(preds), labels))
        order = list(range(40))
        rng.shuffle(order)
        shuffled = macro_f1(confusion([golds[i] for i in order],
                                      [preds[i] for i in order], labels))
        assert shuffled == base

    def test_relabeling_invariance(self):
        rng = random.Random(17)
        labels = ["a", "b", "c"]
        golds = [rng.choice(labels) for _ in range(60)]
        preds = [rng.choice(labels) for _ in range(60)]
        base = macro_f1(confusion(golds, preds, labels))
        swap = {"a": "c", "b": "a", "c": "b"}
        swapped = macro_f1(confusion([swap[g] for g in golds],
                                     [swap[p] for p in preds],
                                     [swap[l] for l in labels]))
        assert swapped == pytest.approx(base, abs=1e-12)


class TestReportRendering:
    def grid(self):
        rep_a = evaluate(["HOF", "NOT"], ["HOF", "NOT"], ["NOT", "HOF"],
                         model="m-a", mode="mono", language="en", task="1a")
        rep_b = evaluate(["HOF", "NOT"], ["HOF", "HOF"], ["NOT", "HOF"],
                         model="m-b", mode="multi", language="en", task="1a")
        return ReportGrid(row_names=["m-a [mono]", "m-b [multi]"],
                          col_names=["en"], cells=[[rep_a], [rep_b]])

    def test_single_cell_report(self):
        rep = evaluate(["HOF"], ["HOF"], ["NOT", "HOF"])
        grid = ReportGrid(row_names=["only"], col_names=["en"], cells=[[rep]])
        text = render_text(grid)
        assert "only" in text and "en" in text

    def test_best_per_column_flagged(self):
        grid = self.grid()
        assert grid.best_per_col == [0]
        text = render_text(grid)
        line_a = next(l for l in text.splitlines() if l.startswith("m-a"))
        assert "*" in line_a

    def test_grid_shape(self):
        grid = self.grid()
        assert len(grid.cells) == 2
        assert all(len(row) == 1 for row in grid.cells)

    def test_csv_columns(self):
        out = render_csv(self.grid())
        header = out.splitlines()[0].split(",")
        assert header[:6] == ["model", "mode", "language", "task", "macro_f1", "accuracy"]
        assert "NOT_precision" in header and "HOF_f1" in header
        assert len(out.splitlines()) == 3

    def test_accuracy(self):
        m = confusion(["a", "a", "b", "b"], ["a", "b", "b", "b"], ["a", "b"])
        assert accuracy(m) == pytest.approx(0.75)

    def test_per_class_prf_values(self):
        m = confusion(["1", "1", "0", "0"], ["1", "0", "0", "0"], ["0", "1"])
        prf = per_class_prf(m)
        assert prf["1"] == (1.0, 0.5, pytest.approx(2 / 3))
        assert prf["0"] == (pytest.approx(2 / 3), 1.0, pytest.approx(0.8))

    def test_macro_is_mean_of_per_class(self):
        rng = random.Random(23)
        labels = ["a", "b", "c"]
        golds = [rng.choice(labels) for _ in range(50)]
        preds = [rng.choice(labels) for _ in range(50)]
        m = confusion(golds, preds, labels)
        prf = per_class_prf(m)
        assert macro_f1(m) == pytest.approx(
            sum(f for _, _, f in prf.values()) / 3, abs=1e-12)


@pytest.fixture(scope="module")
def trained_pair():
    from hatekit.classifier import Featurizer, HeadConfig, Mode, train
    from hatekit.corpus import Task
    from hatekit.embedkit import BackendKind, EmbeddingBackendSpec
    from synthdata import separable_dataset

    ds = separable_dataset(n=40, seed=5)
    backend = EmbeddingBackendSpec(kind=BackendKind.HASH, dim=16)
    tables = Featurizer()
    good = train([ds], Mode.MONO,
                 HeadConfig(hidden_dim=8, dropout=0.0, lr=0.05, batch_size=8,
                            max_epochs=10, patience=10, seed=1, task=Task.TASK1A),
                 backend, tables)
    weak = train([ds], Mode.MULTI,
                 HeadConfig(hidden_dim=8, dropout=0.0, lr=0.05, batch_size=8,
                            max_epochs=1, patience=10, seed=2, task=Task.TASK1A),
                 backend, tables)
    return ds, backend, tables, good, weak


class TestReportGrid:
    def test_single_model_single_test(self, trained_pair):
        ds, backend, tables, good, _ = trained_pair
        grid = metrics.report([good], [ds], backend, tables)
        assert len(grid.cells) == 1 and len(grid.cells[0]) == 1
        assert grid.cells[0][0].macro_f1 > 0.5

    def test_best_per_column_picks_higher(self, trained_pair):
        ds, backend, tables, good, weak = trained_pair
        grid = metrics.report([good, weak], [ds], backend, tables)
        scores = [grid.cells[r][0].macro_f1 for r in range(2)]
        assert grid.best_per_col[0] == int(np.argmax(scores))

    def test_grid_shape_matches_inputs(self, trained_pair):
        ds, backend, tables, good, weak = trained_pair
        grid = metrics.report([good, weak], [ds, ds, ds], backend, tables)
        assert len(grid.cells) == 2
        assert all(len(row) == 3 for row in grid.cells)
        assert len(grid.col_names) == 3
