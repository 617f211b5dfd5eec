"""``litriage`` command line: one subcommand per pipeline stage.

Options can also come from a flat ``key = value`` file given with
``--config``; command-line flags win over the file, which wins over the
built-in defaults. The merged configuration is written next to every
output. Exit codes: 0 ok, 1 I/O failure, 2 invalid input, 3 gradient
check failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from . import datasets as ds
from . import embed, kg, model
from .errors import DataError, TriageError
from .evaluation import ablation_report, confusion, precision_recall_f1
from .text import ConceptLexicon, Vocabulary, build_vocab, encode, read_documents, write_documents

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_GRADCHECK = 0, 1, 2, 3
GRADCHECK_TOLERANCE = 1e-4


class UsageError(TriageError):
    pass


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(s).replace(",", " ").split())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(s).replace(",", " ").split())


def _paths(s: str) -> tuple[str, ...]:
    return tuple(x for x in str(s).split(",") if x)


def _bool(s: str) -> bool:
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


@dataclass(frozen=True)
class Opt:
    key: str
    type: Callable[[str], Any] = str
    default: Any = None
    help: str = ""
    required: bool = False
    choices: tuple | None = None


COMMON = [Opt("seed", int, 0, "seed for every random choice"), Opt("threads", int, 1, "worker threads (1 = deterministic)")]

OPTIONS: dict[str, list[Opt]] = {
    "kg-walk": [
        Opt("graph", _paths, None, "concept TSV and edge TSV, comma-separated", True),
        Opt("out", str, None, "walk corpus output file", True),
        Opt("walks", int, 10, "walks per concept and strategy"),
        Opt("length", int, 40, "walk length (steps)"),
        Opt("radius", float, 0.1, "structural-walk hypercube half-width"),
    ],
    "kg-embed": [
        Opt("corpus", str, None, "walk corpus file", True),
        Opt("out", str, None, "word2vec output file", True),
        Opt("dim", int, 108, "embedding dimension"),
        Opt("window", int, 5, "context window radius"),
        Opt("negatives", int, 5, "negative samples per pair"),
        Opt("epochs", int, 5, "passes over the corpus"),
        Opt("lr", float, 0.025, "initial learning rate"),
        Opt("format", str, "text", "word2vec output format", choices=("text", "binary")),
    ],
    "dataset-split": [
        Opt("docs", str, None, "JSONL documents", True),
        Opt("out", str, None, "manifest output file", True),
        Opt("strategy", str, "asynchronous", "split strategy", choices=ds.STRATEGIES),
        Opt("cutoff", str, "2018-01-01", "asynchronous cutoff date (YYYY-MM-DD)"),
        Opt("val_fraction", float, 0.1, "validation share of pre-cutoff documents"),
        Opt("ratios", _floats, (0.8, 0.1, 0.1), "synchronous train,validation,test ratios"),
    ],
    "dataset-negsample": [
        Opt("pool", str, None, "JSONL candidate pool", True),
        Opt("positives", str, None, "JSONL positive documents", True),
        Opt("out", str, None, "JSONL negatives output", True),
        Opt("count", int, None, "number of negatives", True),
        Opt("strategy", str, "random", "sampling strategy", choices=("random", "ambiguous")),
        Opt("gene_lexicon", str, None, "gene phrase file (ambiguous strategy)"),
        Opt("disease_lexicon", str, None, "disease phrase file (ambiguous strategy)"),
        Opt("k", int, ds.DEFAULT_KEYWORDS, "number of positive keywords"),
    ],
    "dataset-keywords": [
        Opt("positives", str, None, "JSONL positive documents", True),
        Opt("out", str, None, "keyword output file", True),
        Opt("k", int, ds.DEFAULT_KEYWORDS, "number of keywords"),
        Opt("by", str, "document", "frequency mode", choices=("document", "term")),
    ],
    "train": [
        Opt("docs", str, None, "labelled JSONL documents", True),
        Opt("manifest", str, None, "split manifest", True),
        Opt("word_vectors", _paths, None, "comma-separated word2vec files, one per channel", True),
        Opt("vector_format", str, "text", "word2vec format of all vector files", choices=("text", "binary")),
        Opt("kg_vectors", str, None, "concept vectors (word2vec format)"),
        Opt("lexicon", str, None, "phrase<TAB>concept_id lexicon"),
        Opt("out", str, None, "output directory", True),
        Opt("variant", str, "kmcnn", "model variant", choices=model.VARIANTS),
        Opt("n", int, 1000, "sequence length"),
        Opt("filters", int, model.DESK_FILTERS, "filters per width"),
        Opt("filter_count", str, "per_width", "meaning of --filters", choices=("per_width", "total")),
        Opt("filter_widths", _ints, (1, 2, 3), "filter widths"),
        Opt("hidden_dim", int, 100, "hidden layer size"),
        Opt("drop_rate", float, 0.5, "dropout rate"),
        Opt("lr", float, 1e-5, "learning rate"),
        Opt("epochs", int, 50, "training epochs"),
        Opt("batch_size", int, 32, "mini-batch size"),
        Opt("optimizer", str, "adam", "optimizer", choices=("adam", "sgd")),
        Opt("activation", str, "relu", "nonlinearity after convolution", choices=("relu", "tanh")),
        Opt("share_knowledge", _bool, True, "append concept vectors in every channel"),
        Opt("min_count", int, 1, "vocabulary frequency threshold"),
    ],
    "predict": [
        Opt("checkpoint", str, None, "checkpoint file", True),
        Opt("vocab", str, None, "vocabulary file written by train", True),
        Opt("docs", str, None, "JSONL documents", True),
        Opt("word_vectors", _paths, None, "comma-separated word2vec files", True),
        Opt("vector_format", str, "text", "word2vec format", choices=("text", "binary")),
        Opt("kg_vectors", str, None, "concept vectors"),
        Opt("lexicon", str, None, "phrase<TAB>concept_id lexicon"),
        Opt("manifest", str, None, "restrict to one split of this manifest"),
        Opt("split", str, "test", "manifest split to predict", choices=ds.SPLITS),
        Opt("out", str, None, "prediction TSV output", True),
    ],
    "eval": [
        Opt("gold", str, None, "labelled JSONL documents", True),
        Opt("pred", _paths, None, "comma-separated prediction TSVs", True),
        Opt("variants", _paths, ("kmcnn",), "variant name per prediction file"),
        Opt("datasets", _paths, ("dataset",), "dataset name per prediction file"),
        Opt("out", str, None, "report output directory", True),
    ],
    "gradcheck": [
        Opt("trials", int, 100, "random trials per layer"),
        Opt("eps", float, 1e-3, "finite-difference step"),
        Opt("tolerance", float, GRADCHECK_TOLERANCE, "maximum allowed relative error"),
        Opt("out", str, None, "optional report file"),
    ],
}


def _add_opts(p: argparse.ArgumentParser, name: str) -> None:
    p.add_argument("--config", help="key = value configuration file")
    for o in OPTIONS[name] + COMMON:
        flag = "--" + o.key.replace("_", "-")
        extra = f" (default: {o.default})" if o.default is not None else ""
        p.add_argument(flag, dest=o.key, default=None, help=o.help + extra)
    p.set_defaults(command=name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="litriage", description="Knowledge-enhanced CNN literature triage")
    sub = parser.add_subparsers(dest="group", required=True)
    for name in ("kg-walk", "kg-embed", "train", "predict", "eval", "gradcheck"):
        _add_opts(sub.add_parser(name), name)
    dsp = sub.add_parser("dataset", help="build splits and negative samples")
    dsub = dsp.add_subparsers(dest="action", required=True)
    for action in ("split", "negsample", "keywords"):
        _add_opts(dsub.add_parser(action), f"dataset-{action}")
    return parser


def read_config_file(path: str | Path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def resolve(command: str, flags: dict[str, Any], config_file: str | None) -> dict[str, Any]:
    """Merge defaults < config file < flags and convert types."""
    opts = {o.key: o for o in OPTIONS[command] + COMMON}
    file_values = read_config_file(config_file) if config_file else {}
    unknown = sorted(set(file_values) - set(opts))
    if unknown:
        raise UsageError(f"unknown configuration keys for {command}: {', '.join(unknown)}")
    merged = {}
    for key, o in opts.items():
        raw = flags.get(key)
        if raw is None:
            raw = file_values.get(key)
        if raw is None:
            if o.required:
                raise UsageError(f"missing required option --{key.replace('_', '-')}")
            merged[key] = o.default
            continue
        try:
            value = o.type(raw)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid value for {key}: {raw!r} ({exc})") from None
        if o.choices and value not in o.choices:
            raise UsageError(f"{key} must be one of {', '.join(o.choices)}, got {value!r}")
        merged[key] = value
    return merged


def _fmt(v: Any) -> str:
    if isinstance(v, (tuple, list)):
        return ",".join(str(x) for x in v)
    return str(v)


def write_effective_config(cfg: dict[str, Any], path: str | Path) -> None:
    lines = [f"{k} = {_fmt(v)}" for k, v in sorted(cfg.items()) if v is not None]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sidecar(out: str) -> Path:
    return Path(out + ".config")


# -- commands ------------------------------------------------------------------


def cmd_kg_walk(c):
    if len(c["graph"]) != 2:
        raise UsageError("--graph takes CONCEPTS_TSV,EDGES_TSV")
    graph = kg.load_graph(*c["graph"])
    wcfg = kg.WalkConfig(c["walks"], c["length"], c["radius"], c["seed"])
    corpus = kg.generate_corpus(graph, wcfg, workers=c["threads"])
    corpus.write(c["out"])
    write_effective_config(c, _sidecar(c["out"]))
    print(f"wrote {len(corpus)} paths for {graph.num_concepts} concepts to {c['out']}")


def cmd_kg_embed(c):
    corpus = kg.WalkCorpus.read(c["corpus"])
    scfg = embed.SkipGramConfig(
        dim=c["dim"],
        window=c["window"],
        negatives=c["negatives"],
        epochs=c["epochs"],
        learning_rate=c["lr"],
        seed=c["seed"],
        workers=c["threads"],
    )
    m = embed.train_skipgram(corpus, scfg)
    embed.save_embeddings(m, c["out"], format=c["format"])
    write_effective_config(c, _sidecar(c["out"]))
    print(f"wrote {len(m)} x {m.dim} vectors to {c['out']}")


def cmd_dataset_split(c):
    docs = read_documents(c["docs"])
    if c["strategy"] == "asynchronous":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            manifest = ds.asynchronous_split(docs, dt.date.fromisoformat(c["cutoff"]), c["val_fraction"], c["seed"])
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        manifest.check_temporal(docs)
    else:
        manifest = ds.synchronous_split(docs, c["ratios"], c["seed"])
    ds.write_manifest(manifest, c["out"])
    ds.read_manifest(c["out"])  # re-validates disjointness
    write_effective_config(c, _sidecar(c["out"]))
    print(f"train {len(manifest.train)} / validation {len(manifest.validation)} / test {len(manifest.test)}")


def cmd_dataset_negsample(c):
    pool = read_documents(c["pool"])
    positives = read_documents(c["positives"])
    if c["strategy"] == "random":
        negs = ds.negative_sample_random(pool, c["count"], positives, c["seed"])
    else:
        if not c["gene_lexicon"] or not c["disease_lexicon"]:
            raise UsageError("ambiguous sampling needs --gene-lexicon and --disease-lexicon")
        spec = ds.NegativeSampleSpec(
            "ambiguous",
            pool,
            c["count"],
            ds.load_phrases(c["gene_lexicon"]),
            ds.load_phrases(c["disease_lexicon"]),
            c["k"],
            c["seed"],
        )
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            negs = ds.negative_sample_ambiguous(spec, positives)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    pos_ids = {d.pmid for d in positives}
    clash = [d.pmid for d in negs if d.pmid in pos_ids]
    if clash:
        raise DataError(f"negative samples collide with positives: {clash[:5]}")
    write_documents(negs, c["out"])
    write_effective_config(c, _sidecar(c["out"]))
    print(f"wrote {len(negs)} negatives to {c['out']}")


def cmd_dataset_keywords(c):
    positives = read_documents(c["positives"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        words = ds.keyword_top_k(positives, c["k"], by=c["by"])
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    Path(c["out"]).write_text("".join(w + "\n" for w in words), encoding="utf-8")
    write_effective_config(c, _sidecar(c["out"]))
    print(" ".join(words))


def _load_vectors(paths, fmt):
    return [embed.load_word_vectors(p, fmt) for p in paths]


def _label_int(doc) -> int:
    if doc.label is None:
        raise UsageError(f"document {doc.pmid} has no label")
    return int(doc.is_positive)


def _model_config(c, dw: int, dk: int) -> model.ModelConfig:
    base = model.ModelConfig(
        n=c["n"],
        dw=dw,
        dk=dk,
        filter_widths=c["filter_widths"],
        filters=c["filters"],
        filter_count=c["filter_count"],
        hidden_dim=c["hidden_dim"],
        drop_rate=c["drop_rate"],
        learning_rate=c["lr"],
        epochs=c["epochs"],
        batch_size=c["batch_size"],
        optimizer=c["optimizer"],
        activation=c["activation"],
        share_knowledge=c["share_knowledge"],
        seed=c["seed"],
    )
    return model.ablation_variant(base, c["variant"], knowledge_dim=dk)


def _features(cfg, vocab, lexicon, word_vectors, kg_vectors):
    return model.FeatureBuilder(cfg, vocab, lexicon, word_vectors, kg_vectors)


def _write_predictions(rows, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pmid, label, score in rows:
            fh.write(f"{pmid}\t{label}\t{score!r}\n")


def cmd_train(c):
    docs = read_documents(c["docs"])
    manifest = ds.read_manifest(c["manifest"])
    manifest.check_temporal(docs)
    train_docs = manifest.select(docs, "train")
    val_docs = manifest.select(docs, "validation")
    word_vectors = _load_vectors(c["word_vectors"], c["vector_format"])
    uses_knowledge = c["variant"] in ("kcnn", "kmcnn")
    kg_vectors = None
    if uses_knowledge:
        if not c["kg_vectors"] or not c["lexicon"]:
            raise UsageError(f"variant {c['variant']} needs --kg-vectors and --lexicon")
        kg_vectors = embed.load_word_vectors(c["kg_vectors"], c["vector_format"])
    lexicon = ConceptLexicon.load(c["lexicon"]) if c["lexicon"] else ConceptLexicon()
    cfg = _model_config(c, word_vectors[0].dim, kg_vectors.dim if kg_vectors else 0)
    vocab = build_vocab(train_docs, c["min_count"])
    features = _features(cfg, vocab, lexicon, word_vectors, kg_vectors)

    def encoded(ds_):
        return [(encode(d, vocab, lexicon, cfg.n), _label_int(d)) for d in ds_]

    val_set = encoded(val_docs)
    ckpt, history = model.train(encoded(train_docs), val_set, cfg, features)
    out = Path(c["out"])
    out.mkdir(parents=True, exist_ok=True)
    model.save_checkpoint(ckpt, out / "checkpoint.kmc")
    model.write_history(history, out / "history.csv")
    vocab.save(out / "vocab.txt")
    _write_predictions(model.predict(ckpt, [e for e, _ in val_set], features), out / "validation_predictions.tsv")
    write_effective_config(c, out / "effective_config.txt")
    last = history[-1] if history else None
    print(f"trained {cfg.epochs} epochs" + (f"; last validation F1 {last.val_f1:.3f}" if last else ""))


def cmd_predict(c):
    ckpt = model.load_checkpoint(c["checkpoint"])
    cfg = ckpt.config
    vocab = Vocabulary.load(c["vocab"])
    lexicon = ConceptLexicon.load(c["lexicon"]) if c["lexicon"] else ConceptLexicon()
    word_vectors = _load_vectors(c["word_vectors"], c["vector_format"])
    kg_vectors = embed.load_word_vectors(c["kg_vectors"], c["vector_format"]) if cfg.dk else None
    features = _features(cfg, vocab, lexicon, word_vectors, kg_vectors)
    docs = read_documents(c["docs"])
    if c["manifest"]:
        docs = ds.read_manifest(c["manifest"]).select(docs, c["split"])
    rows = model.predict(ckpt, [encode(d, vocab, lexicon, cfg.n) for d in docs], features)
    _write_predictions(rows, c["out"])
    write_effective_config(c, _sidecar(c["out"]))
    print(f"wrote {len(rows)} predictions to {c['out']}")


def read_predictions(path) -> list[tuple[str, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            cols = line.rstrip("\r\n").split("\t")
            if len(cols) < 2 or cols[1] not in ("positive", "negative"):
                raise UsageError(f"{path}:{lineno}: expected 'pmid<TAB>label<TAB>score'")
            rows.append((cols[0], cols[1]))
    return rows


def cmd_eval(c):
    gold_docs = {d.pmid: d for d in read_documents(c["gold"])}
    preds, variants, names = c["pred"], c["variants"], c["datasets"]
    if len(variants) == 1:
        variants = variants * len(preds)
    if len(names) == 1:
        names = names * len(preds)
    if not len(preds) == len(variants) == len(names):
        raise UsageError("--pred, --variants and --datasets must have matching lengths")
    runs: dict[str, dict] = {}
    for path, variant, name in zip(preds, variants, names):
        rows = read_predictions(path)
        missing = [p for p, _ in rows if p not in gold_docs]
        if missing:
            raise UsageError(f"{path}: pmids without gold labels, e.g. {missing[:5]}")
        gold = [(p, gold_docs[p].label) for p, _ in rows]
        runs.setdefault(variant, {})[name] = precision_recall_f1(confusion(rows, gold))
    report = ablation_report(runs, list(dict.fromkeys(names)))
    out = Path(c["out"])
    out.mkdir(parents=True, exist_ok=True)
    for metric in ("f1", "precision", "recall"):
        (out / f"{metric}.csv").write_text(report.to_csv(metric), encoding="utf-8")
        (out / f"{metric}.txt").write_text(report.to_text(metric), encoding="utf-8")
    write_effective_config(c, out / "effective_config.txt")
    print(report.to_text("f1"), end="")


def gradcheck_report(trials: int, seed: int, eps: float) -> dict[str, float]:
    """Worst relative error per layer and for a desk-scale full model."""
    from .checks import full_model_gradcheck, layer_gradchecks

    result = layer_gradchecks(trials, seed, eps)
    result["kmcnn"] = full_model_gradcheck(trials, seed, eps)
    return result


def cmd_gradcheck(c):
    result = gradcheck_report(c["trials"], c["seed"], c["eps"])
    lines = []
    failed = False
    for name, err in result.items():
        ok = err < c["tolerance"]
        failed |= not ok
        lines.append(f"{name}\t{err:.3e}\t{'ok' if ok else 'FAIL'}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if c["out"]:
        Path(c["out"]).write_text(text, encoding="utf-8")
        write_effective_config(c, _sidecar(c["out"]))
    return EXIT_GRADCHECK if failed else EXIT_OK


COMMANDS = {
    "kg-walk": cmd_kg_walk,
    "kg-embed": cmd_kg_embed,
    "dataset-split": cmd_dataset_split,
    "dataset-negsample": cmd_dataset_negsample,
    "dataset-keywords": cmd_dataset_keywords,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "group", "action", "config")}
    try:
        cfg = resolve(args.command, flags, args.config)
        if cfg["threads"] < 1:
            raise UsageError("threads must be >= 1")
        code = COMMANDS[args.command](cfg)
        return code or EXIT_OK
    except (TriageError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
