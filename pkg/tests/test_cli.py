import csv
import json

import pytest

from hatekit import cli

from conftest import DATA

LEX = str(DATA / "lexicon_small.txt")
EN = str(DATA / "mini_en_train.csv")
HI = str(DATA / "mini_hi_train.tsv")
MR = str(DATA / "mini_mr_train.csv")


def run(argv):
    return cli.main(argv)


def train_args(tmp_path, out_name="model.json", extra=()):
    out = tmp_path / out_name
    argv = ["train", "--data", f"en={EN}", "--mode", "mono", "--task", "1a",
            "--backend", "hash", "--dim", "16", "--seed", "3",
            "--hidden-dim", "8", "--batch-size", "8", "--max-epochs", "2",
            "--out", str(out), "--no-figures", *extra]
    return argv, out


class TestSegment:
    def test_paper_example(self, capsys):
        assert run(["segment", "#IPL2019Final", "--lexicon", LEX]) == 0
        assert capsys.readouterr().out.strip() == "IPL 2019 Final"

    def test_single_vocab_word(self, capsys):
        assert run(["segment", "congress", "--lexicon", LEX]) == 0
        assert capsys.readouterr().out.strip() == "congress"

    def test_missing_lexicon_exit_2(self, capsys):
        assert run(["segment", "#abc", "--lexicon", "/no/such/file"]) == 2
        assert "not found" in capsys.readouterr().err


class TestPreprocess:
    def test_adds_entity_columns(self, tmp_path, capsys):
        out = tmp_path / "out.csv"
        assert run(["preprocess", EN, str(out), "--lang", "en"]) == 0
        with open(out, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 12
        first = rows[0]
        assert first["tokens"] == "you are awful"
        assert first["hashtags"] == "CheaterFraud"
        assert first["emojis"] == "😡"

    def test_empty_file_header_only(self, tmp_path):
        src = tmp_path / "empty.csv"
        src.write_text("hasoc_id,tweet_id,text,task_1\n", encoding="utf-8")
        out = tmp_path / "out.csv"
        assert run(["preprocess", str(src), str(out)]) == 0
        lines = out.read_text(encoding="utf-8").strip().splitlines()
        assert len(lines) == 1
        assert "tokens" in lines[0]

    def test_bad_csv_nonzero_exit(self, tmp_path, capsys):
        src = tmp_path / "bad.csv"
        src.write_text("id,body\n1,hello\n", encoding="utf-8")
        out = tmp_path / "out.csv"
        code = run(["preprocess", str(src), str(out)])
        assert code == 2
        assert "text" in capsys.readouterr().err


class TestStats:
    def test_mini_hi(self, capsys):
        assert run(["stats", "--in", HI, "--lang", "hi"]) == 0
        out = capsys.readouterr().out
        assert "HOF 4 / NOT 6" in out
        assert "HATE 2 / OFFN 1 / PRFN 1 / NONE 6" in out
        assert "TOTAL 10" in out

    def test_empty_dataset(self, tmp_path, capsys):
        src = tmp_path / "empty.csv"
        src.write_text("hasoc_id,tweet_id,text,task_1\n", encoding="utf-8")
        assert run(["stats", "--in", str(src)]) == 0
        assert "HOF 0 / NOT 0" in capsys.readouterr().out

    def test_malformed_exit_2(self, tmp_path):
        src = tmp_path / "bad.csv"
        src.write_text("hasoc_id,tweet_id,text,task_1\nx,1,hi,MAYBE\n", encoding="utf-8")
        assert run(["stats", "--in", str(src)]) == 2


class TestTrain:
    def test_train_writes_model_and_history(self, tmp_path, capsys):
        argv, out = train_args(tmp_path)
        assert run(argv) == 0
        assert out.exists()
        history = json.loads((tmp_path / "model.json.history.json").read_text())
        assert len(history) >= 1
        doc = json.loads(out.read_text())
        assert doc["format_version"] == 1
        assert doc["labels"] == ["NOT", "HOF"]

    def test_missing_dataset_exit_2(self, tmp_path, capsys):
        argv, _ = train_args(tmp_path)
        argv[argv.index(f"en={EN}")] = "en=/no/such.csv"
        assert run(argv) == 2

    def test_mono_rejects_two_datasets(self, tmp_path):
        argv, _ = train_args(tmp_path, extra=["--data", f"hi={HI}"])
        assert run(argv) == 2

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = {"datasets": {"en": EN}, "backend": "hash", "dim": 16,
               "mode": "mono", "task": "1a", "seed": 1, "hidden_dim": 8,
               "batch_size": 8, "max_epochs": 9, "out": str(tmp_path / "m.json")}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
        assert run(["train", "--config", str(cfg_path), "--max-epochs", "2",
                    "--no-figures"]) == 0
        history = json.loads((tmp_path / "m.json.history.json").read_text())
        assert len(history) <= 2  # flag overrides the config's 9

    def test_unknown_config_key_exit_2(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text('{"no_such_key": 1}', encoding="utf-8")
        assert run(["train", "--config", str(cfg_path)]) == 2

    def test_figures_written(self, tmp_path):
        argv, out = train_args(tmp_path)
        argv.remove("--no-figures")
        assert run(argv) == 0
        assert (tmp_path / "model.json.history.png").exists()

    def test_soup_flag_trains_on_balanced_data(self, tmp_path):
        argv, out = train_args(tmp_path, extra=["--soup", "--val-fraction", "0.25"])
        assert run(argv) == 0
        assert out.exists()


class TestPredictAndEvaluate:
    @pytest.fixture()
    def model_path(self, tmp_path):
        argv, out = train_args(tmp_path)
        assert run(argv) == 0
        return out

    def test_predict_vocabulary_closure(self, tmp_path, model_path):
        out = tmp_path / "preds.csv"
        assert run(["predict", "--model", str(model_path), "--in", EN,
                    "--out", str(out), "--backend", "hash", "--dim", "16",
                    "--seed", "3"]) == 0
        with open(out, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 12
        assert all(r["predicted"] in {"NOT", "HOF"} for r in rows)
        for r in rows:
            total = float(r["prob_NOT"]) + float(r["prob_HOF"])
            assert abs(total - 1.0) < 1e-5

    def test_evaluate_writes_reports(self, tmp_path, model_path, capsys):
        outdir = tmp_path / "reports"
        assert run(["evaluate", "--model", str(model_path),
                    "--test", f"en={EN}", "--outdir", str(outdir),
                    "--backend", "hash", "--dim", "16"]) == 0
        assert (outdir / "report.csv").exists()
        assert (outdir / "report.txt").exists()
        assert (outdir / "report.png").exists()
        printed = capsys.readouterr().out
        assert "en" in printed
        header = (outdir / "report.csv").read_text().splitlines()[0]
        assert header.startswith("model,mode,language,task,macro_f1,accuracy")

    def test_evaluate_without_models_exit_2(self, tmp_path):
        assert run(["evaluate", "--test", f"en={EN}"]) == 2

    def test_predict_with_wrong_tables_exit_2(self, tmp_path, model_path, capsys):
        # model was trained without tables (aux_dim 8); aux_dim 6 must be rejected
        out = tmp_path / "preds.csv"
        code = run(["predict", "--model", str(model_path), "--in", EN,
                    "--out", str(out), "--backend", "hash", "--dim", "16",
                    "--seed", "3", "--aux-dim", "6"])
        assert code == 2
        assert "aux_dim" in capsys.readouterr().err


class TestMisc:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["--version"])
        assert exc.value.code == 0
        assert capsys.readouterr().out.startswith("hatekit ")

    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for name in ("preprocess", "segment", "train", "predict", "evaluate", "stats"):
            assert name in out

    def test_subcommand_help_documents_flags(self, capsys):
        with pytest.raises(SystemExit):
            run(["train", "--help"])
        out = capsys.readouterr().out
        for flag in ("--config", "--seed", "--backend", "--endpoint",
                     "--model-id", "--task", "--mode", "--lang"):
            assert flag in out

    def test_usage_error_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            run(["train", "--backend", "bogus"])
        assert exc.value.code == 2
