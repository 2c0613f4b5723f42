"""Command-line entry point.

Subcommands: preprocess | segment | train | predict | evaluate | stats.
Every option can also be set in a JSON config file (--config); explicit
flags override config values. All randomness flows from --seed. Exit
codes: 0 success, 2 usage/config error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import Optional

from . import __version__, classifier, corpus, embedkit, emojikit, hashseg, metrics, textprep
from .classifier import Featurizer, HeadConfig, Mode
from .corpus import Task
from .errors import InputError, PipelineError
from .textprep import Language

CONFIG_KEYS = {
    "seed": 0, "backend": "hash", "dim": 64, "model_id": "", "endpoint": "",
    "timeout_ms": 10_000, "max_batch": 32, "hash_seed": 0,
    "task": "1a", "mode": "mono", "lang": None,
    "datasets": {}, "lexicon": None, "emoji_registry": None,
    "word_table": None, "emoji_table": None, "aux_dim": 8,
    "hidden_dim": 256, "dropout": 0.2, "lr": 2e-4, "batch_size": 64,
    "max_epochs": 50, "patience": 5, "val_fraction": 0.1,
    "use_hashtags": True, "use_emojis": True, "use_descriptions": True,
    "soup": False, "cache_dir": None, "out": "model.json",
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON config file; flags override its fields")
    shared.add_argument("--seed", type=int, help="master seed for all randomness")
    shared.add_argument("--backend", choices=["hash", "remote"], help="embedding backend")
    shared.add_argument("--endpoint", help="embedding service URL (remote backend)")
    shared.add_argument("--model-id", dest="model_id",
                        choices=["xlmr", "mbert", "distilmbert"],
                        help="remote model identity")
    shared.add_argument("--task", choices=["1a", "1b"], help="classification task")
    shared.add_argument("--mode", choices=["mono", "multi"], help="training regime")
    shared.add_argument("--lang", choices=["en", "hi", "mr"], help="dataset language")
    shared.add_argument("--dim", type=int, help="embedding dimension")
    shared.add_argument("--aux-dim", dest="aux_dim", type=int,
                        help="auxiliary feature dimension (when no tables are given)")
    shared.add_argument("--hash-seed", dest="hash_seed", type=int,
                        help="seed of the hash embedding backend")
    shared.add_argument("--timeout-ms", dest="timeout_ms", type=int)
    shared.add_argument("--max-batch", dest="max_batch", type=int)
    shared.add_argument("--lexicon", help="hashtag segmentation lexicon (token<TAB>count)")
    shared.add_argument("--emoji-registry", dest="emoji_registry",
                        help="emoji description TSV")
    shared.add_argument("--word-table", dest="word_table",
                        help="word embedding table (word2vec text format)")
    shared.add_argument("--emoji-table", dest="emoji_table",
                        help="emoji embedding table (word2vec text format)")
    shared.add_argument("--cache-dir", dest="cache_dir",
                        help="on-disk embedding cache directory")

    parser = argparse.ArgumentParser(prog="hatekit",
                                     description="Multilingual hate-speech detection pipeline")
    parser.add_argument("--version", action="version", version=f"hatekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[shared],
                       help="clean a dataset; write tokens and entities as added columns")
    p.add_argument("in_csv")
    p.add_argument("out_csv")

    p = sub.add_parser("segment", parents=[shared], help="segment a hashtag")
    p.add_argument("hashtag")

    p = sub.add_parser("train", parents=[shared], help="train a classification head")
    p.add_argument("--data", action="append", default=[],
                   metavar="LANG=PATH", help="training dataset (repeatable)")
    p.add_argument("--out", help="output model file (history JSON/PNG written alongside)")
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--val-fraction", dest="val_fraction", type=float)
    p.add_argument("--soup", action="store_const", const=True, default=None,
                   help="balance class sizes with similarity-based resampling "
                        "(off by default; costs accuracy on the real data)")
    p.add_argument("--no-figures", action="store_true", help="skip the history plot")

    p = sub.add_parser("predict", parents=[shared], help="batch inference to CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="in_csv", required=True)
    p.add_argument("--out", dest="out_csv", required=True)

    p = sub.add_parser("evaluate", parents=[shared],
                       help="evaluate models on test sets; write report CSV/text/figure")
    p.add_argument("--model", action="append", default=[], required=False,
                   help="trained model file (repeatable)")
    p.add_argument("--test", action="append", default=[],
                   metavar="LANG=PATH", help="test dataset (repeatable)")
    p.add_argument("--outdir", default=".", help="where report files go")
    p.add_argument("--no-figures", action="store_true", help="skip the report figure")

    p = sub.add_parser("stats", parents=[shared], help="print class statistics")
    p.add_argument("--in", dest="in_csv", required=True)

    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(CONFIG_KEYS)
    if getattr(args, "config", None):
        path = args.config
        if not os.path.exists(path):
            raise InputError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                loaded = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: invalid JSON ({exc})") from None
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise InputError(f"{path}: unknown config keys {sorted(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    data_flags = getattr(args, "data", None) or []
    if data_flags:
        cfg["datasets"] = dict(cfg["datasets"])
        for item in data_flags:
            lang, path = _parse_lang_path(item)
            cfg["datasets"][lang] = path
    return cfg


def _parse_lang_path(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise InputError(f"expected LANG=PATH, got {item!r}")
    lang, path = item.split("=", 1)
    if lang not in ("en", "hi", "mr"):
        raise InputError(f"unknown language {lang!r} (expected en|hi|mr)")
    return lang, path


def _require_file(path: Optional[str], what: str) -> str:
    if not path:
        raise InputError(f"missing required {what}")
    if not os.path.exists(path):
        raise InputError(f"{what} not found: {path}")
    return path


def build_backend(cfg: dict) -> embedkit.EmbeddingBackendSpec:
    if cfg["backend"] == "hash":
        return embedkit.EmbeddingBackendSpec(
            kind=embedkit.BackendKind.HASH, dim=int(cfg["dim"]), seed=int(cfg["hash_seed"]))
    if not cfg["endpoint"] or not cfg["model_id"]:
        raise InputError("remote backend needs --endpoint and --model-id")
    dim = cfg.get("dim")
    health = embedkit.check_health(cfg["endpoint"], int(cfg["timeout_ms"]))
    dims = health.get("dims", {})
    if cfg["model_id"] in dims:
        dim = int(dims[cfg["model_id"]])
    if not dim:
        raise InputError("could not determine remote embedding dim; pass --dim")
    max_batch = int(cfg["max_batch"])
    if "max_batch" in health:
        max_batch = min(max_batch, int(health["max_batch"]))
    return embedkit.EmbeddingBackendSpec(
        kind=embedkit.BackendKind.REMOTE, dim=int(dim), model_id=cfg["model_id"],
        endpoint=cfg["endpoint"], timeout_ms=int(cfg["timeout_ms"]),
        max_batch=max_batch)


def build_featurizer(cfg: dict) -> Featurizer:
    lexicon = registry = word_table = emoji_table = None
    if cfg["lexicon"]:
        lexicon = hashseg.load_lexicon(_require_file(cfg["lexicon"], "lexicon"))
    if cfg["emoji_registry"]:
        registry = emojikit.load_descriptions(_require_file(cfg["emoji_registry"], "emoji registry"))
    if cfg["word_table"]:
        word_table = emojikit.load_embedding_table(_require_file(cfg["word_table"], "word table"))
    if cfg["emoji_table"]:
        emoji_table = emojikit.load_embedding_table(_require_file(cfg["emoji_table"], "emoji table"))
    return Featurizer(lexicon=lexicon, registry=registry, word_table=word_table,
                      emoji_table=emoji_table, aux_dim=int(cfg["aux_dim"]),
                      use_hashtags=bool(cfg["use_hashtags"]),
                      use_emojis=bool(cfg["use_emojis"]),
                      use_descriptions=bool(cfg["use_descriptions"]))


def build_head_config(cfg: dict) -> HeadConfig:
    return HeadConfig(hidden_dim=int(cfg["hidden_dim"]), dropout=float(cfg["dropout"]),
                      lr=float(cfg["lr"]), batch_size=int(cfg["batch_size"]),
                      max_epochs=int(cfg["max_epochs"]), patience=int(cfg["patience"]),
                      seed=int(cfg["seed"]), task=Task(cfg["task"]),
                      val_fraction=float(cfg["val_fraction"]))


# --- commands ---------------------------------------------------------------

ENTITY_COLUMNS = ("tokens", "hashtags", "mentions", "urls", "emojis",
                  "smileys", "reserved", "numbers")


def cmd_preprocess(args) -> int:
    cfg = resolve_config(args)
    lang = Language(cfg["lang"] or "en")
    _require_file(args.in_csv, "input CSV")
    with open(args.in_csv, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames
        if not fields or "text" not in fields:
            raise InputError(f"{args.in_csv}: no 'text' column")
        rows = list(reader)
    out_fields = list(fields) + [c for c in ENTITY_COLUMNS if c not in fields]
    with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=out_fields)
        writer.writeheader()
        for rec in rows:
            text = rec.get("text") or ""
            if text.strip():
                try:
                    cleaned = textprep.clean(textprep.RawPost(text=text, language=lang))
                except textprep.AllContentRemoved as err:
                    cleaned = err.result
                ents = cleaned.entities
                rec = dict(rec)
                rec["tokens"] = " ".join(cleaned.tokens)
                for name in ENTITY_COLUMNS[1:]:
                    rec[name] = " ".join(getattr(ents, name))
            else:
                rec = dict(rec)
                for name in ENTITY_COLUMNS:
                    rec[name] = ""
            writer.writerow(rec)
    print(f"wrote {len(rows)} rows to {args.out_csv}")
    return 0


def cmd_segment(args) -> int:
    cfg = resolve_config(args)
    lexicon = hashseg.load_lexicon(_require_file(cfg["lexicon"], "lexicon"))
    tag = args.hashtag.lstrip("#")
    if not tag:
        raise InputError("empty hashtag")
    print(" ".join(hashseg.segment(tag, lexicon).tokens))
    return 0


def _load_datasets(cfg: dict) -> list[corpus.LabeledDataset]:
    datasets = []
    items = cfg["datasets"]
    if not items:
        raise InputError("no training data given (use --data LANG=PATH)")
    for lang in sorted(items):
        path = _require_file(items[lang], f"dataset for {lang}")
        datasets.append(corpus.load_dataset(path, Language(lang)))
    return datasets


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    datasets = _load_datasets(cfg)
    mode = Mode(cfg["mode"])
    if mode is Mode.MONO and len(datasets) != 1:
        raise InputError("mono mode takes exactly one --data entry")
    backend = build_backend(cfg)
    featurizer = build_featurizer(cfg)
    head_config = build_head_config(cfg)
    cache = embedkit.EmbeddingCache(cfg["cache_dir"], backend) if cfg["cache_dir"] else None

    if cfg["soup"]:
        def embed_fn(text):
            return embedkit.embed_batch(backend, [text])[0]

        datasets = [corpus.soup_resample(d, head_config.task, embed_fn, head_config.seed)
                    for d in datasets]

    model = classifier.train(datasets, mode, head_config, backend, featurizer, cache)
    if cache is not None:
        cache.save()

    out = cfg["out"]
    classifier.save_model(model, out)
    history_path = out + ".history.json"
    with open(history_path, "w", encoding="utf-8") as fh:
        json.dump(model.history, fh, indent=1)
        fh.write("\n")
    if not getattr(args, "no_figures", False):
        from . import figures
        figures.save_history_figure(model.history, out + ".history.png")
    best = max(h["val_macro_f1"] for h in model.history)
    print(f"trained {mode.value} model ({len(model.history)} epochs, "
          f"best val macro-F1 {best:.4f}) -> {out}")
    return 0


def _read_posts_csv(path: str) -> tuple[list[dict], list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "text" not in fields:
            raise InputError(f"{path}: no 'text' column")
        return list(reader), list(fields)


def cmd_predict(args) -> int:
    cfg = resolve_config(args)
    model = classifier.load_model(_require_file(args.model, "model file"))
    cfg["task"] = model.config.task.value
    backend = build_backend(cfg)
    featurizer = build_featurizer(cfg)
    lang = Language(cfg["lang"] or "en")
    records, fields = _read_posts_csv(_require_file(args.in_csv, "input CSV"))

    rows = [corpus.Row(hasoc_id=rec.get("hasoc_id") or rec.get("_id") or str(i),
                       tweet_id=rec.get("tweet_id") or str(i),
                       text=rec.get("text") or "", task_1="NOT")
            for i, rec in enumerate(records)]
    labels, probs = classifier.predict_rows(model, rows, lang, backend, featurizer)
    out_fields = fields + ["predicted"] + [f"prob_{label}" for label in model.labels]
    with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=out_fields)
        writer.writeheader()
        for rec, label, p in zip(records, labels, probs):
            rec = dict(rec)
            rec["predicted"] = label
            for lab, value in zip(model.labels, p):
                rec[f"prob_{lab}"] = f"{value:.6f}"
            writer.writerow(rec)
    print(f"wrote {len(records)} predictions to {args.out_csv}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = resolve_config(args)
    if not args.model:
        raise InputError("no models given (use --model PATH)")
    if not args.test:
        raise InputError("no test sets given (use --test LANG=PATH)")
    models = [classifier.load_model(_require_file(m, "model file")) for m in args.model]
    test_sets = []
    for item in args.test:
        lang, path = _parse_lang_path(item)
        test_sets.append(corpus.load_dataset(_require_file(path, "test set"), Language(lang)))
    cfg["task"] = models[0].config.task.value
    backend = build_backend(cfg)
    featurizer = build_featurizer(cfg)

    grid = metrics.report(models, test_sets, backend, featurizer)
    text = metrics.render_text(grid)
    print(text)
    os.makedirs(args.outdir, exist_ok=True)
    with open(os.path.join(args.outdir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    with open(os.path.join(args.outdir, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(metrics.render_csv(grid))
    if not getattr(args, "no_figures", False):
        from . import figures
        figures.save_report_figure(grid, os.path.join(args.outdir, "report.png"))
    return 0


def cmd_stats(args) -> int:
    cfg = resolve_config(args)
    lang = Language(cfg["lang"] or "en")
    dataset = corpus.load_dataset(_require_file(args.in_csv, "input CSV"), lang)
    stats = corpus.class_stats(dataset)
    print(" / ".join(f"{label} {stats.task1[label]}"
                     for label in ("HOF", "NOT")))
    if any(stats.task2.values()):
        print(" / ".join(f"{label} {stats.task2[label]}"
                         for label in ("HATE", "OFFN", "PRFN", "NONE")))
    print(f"TOTAL {stats.total}")
    return 0


COMMANDS = {
    "preprocess": cmd_preprocess,
    "segment": cmd_segment,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "stats": cmd_stats,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
