"""Acceptance gate: one test per primary criterion, each reporting a PASS/FAIL
line in the terminal summary."""

import datetime as dt
import time
import warnings

import numpy as np
from scipy import stats

from litriage import checks, datasets as ds, embed, kg, model, nn, synthetic
from litriage.evaluation import ConfusionCounts, ablation_report, confusion, precision_recall_f1
from litriage.text import build_vocab, encode

TOL = 1e-4


def test_gradient_fidelity(criterion):
    start = time.perf_counter()
    layers = checks.layer_gradchecks(trials=100, seed=0, eps=1e-3)
    full = checks.full_model_gradcheck(trials=100, seed=0, eps=1e-3, **checks.DESK_GRADCHECK)
    elapsed = time.perf_counter() - start
    worst = max(max(layers.values()), full)
    cfg = model.ModelConfig(**checks.DESK_GRADCHECK)
    ok = worst < TOL and elapsed < 60 and (cfg.n, cfg.k, cfg.filters_per_width) == (16, 12, 4)
    criterion(ok, f"worst layer {max(layers.values()):.2e}, full model {full:.2e} (< {TOL:g}); {elapsed:.1f} s (< 60 s)")


def test_convolution_shape_law(criterion):
    bad = []
    for n in range(1, 65):
        for h in (1, 2, 3):
            if h > n:
                continue
            out = nn.Conv1D(3, h, 2, np.random.default_rng(n)).forward(np.ones((n, 3)))
            if out.shape[0] != n - h + 1:
                bad.append((n, h, out.shape[0]))
    criterion(not bad, f"{len(bad)} violations over n in 1..64, h in 1..3")


def test_channel_collapse_equivalence(criterion):
    cfg = model.ModelConfig(**checks.DESK_GRADCHECK)
    two = model.KMCNN(cfg)
    one = model.KMCNN(model.ablation_variant(cfg, "kcnn", knowledge_dim=cfg.dk))
    one.load_parameters(two.parameters())
    x = np.random.default_rng(0).standard_normal((1000, 1, cfg.n, cfg.k))
    diff = float(np.max(np.abs(two.forward(np.concatenate([x, x], axis=1)) - one.forward(x))))
    criterion(diff < 1e-9, f"max |p2 - p1| = {diff:.2e} over 1000 inputs (< 1e-9)")


def test_walk_soundness(criterion):
    rng = np.random.default_rng(0)
    violations = 0
    for i in range(50):
        size = int(rng.integers(2, 101))
        g = synthetic.random_typed_graph(rng, size, num_types=int(rng.integers(1, 6)), edge_prob=float(rng.uniform(0.02, 0.2)))
        cfg = kg.WalkConfig(walks_per_node=2, walk_length=10, s_path_radius=float(rng.uniform(0, 0.5)), seed=i)
        corpus = kg.generate_corpus(g, cfg)
        violations += len(corpus) != 2 * cfg.walks_per_node * g.num_concepts
        sig = {c: kg.signature(g, c) for c in g.concept_ids}
        for path, tag in zip(corpus.paths, corpus.tags):
            for a, b in zip(path, path[1:]):
                if tag == "H":
                    violations += not g.has_edge(a, b)
                else:
                    violations += a == b or np.max(np.abs(sig[a] - sig[b])) > cfg.s_path_radius + 1e-12

    g = synthetic.random_typed_graph(np.random.default_rng(7), 20, edge_prob=0.3)
    start = max(g.concept_ids, key=g.degree)
    nbrs = g.neighbors(start)
    walk_rng = np.random.default_rng(1)
    draws = [kg.h_walk(g, start, 1, walk_rng)[1] for _ in range(100_000)]
    counts = [draws.count(n) for n in nbrs]
    p = stats.chisquare(counts).pvalue
    criterion(violations == 0 and p > 0.01,
              f"{violations} step/count violations on 50 graphs; chi-square p = {p:.3f} over {len(nbrs)} neighbours (> 0.01)")


def test_embedding_separation(criterion):
    start = time.perf_counter()
    g = synthetic.clique_pair(8)
    gaps = []
    for seed in range(5):
        corpus = kg.generate_corpus(g, kg.WalkConfig(5, 20, 0.0, seed))
        m = embed.train_skipgram(corpus.tagged("H"), embed.SkipGramConfig(dim=16, window=2, negatives=5, epochs=5, seed=seed))
        v = m.table_for(f"{s}{i}" for s in "ab" for i in range(8))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        cos = v @ v.T
        same = np.zeros((16, 16), dtype=bool)
        same[:8, :8] = same[8:, 8:] = True
        np.fill_diagonal(same, False)
        cross = np.zeros((16, 16), dtype=bool)
        cross[:8, 8:] = cross[8:, :8] = True
        gaps.append(cos[same].mean() - cos[cross].mean())
    elapsed = time.perf_counter() - start
    passed = sum(gap >= 0.2 for gap in gaps)
    criterion(passed == 5 and elapsed < 30,
              f"{passed}/5 seeds with gap >= 0.2 (gaps {', '.join(f'{x:.2f}' for x in gaps)}); {elapsed:.1f} s (< 30 s)")


def _f1(ckpt, encoded, features):
    preds = model.predict(ckpt, [e for e, _ in encoded], features)
    gold = [(e.pmid, y) for e, y in encoded]
    return precision_recall_f1(confusion([(p, int(lab == "positive")) for p, lab, _ in preds], gold))


def test_end_to_end_learnability(criterion):
    start = time.perf_counter()
    docs = synthetic.separable_documents(200, seed=0)
    manifest = ds.synchronous_split(docs, (0.7, 0.1, 0.2), seed=0)
    train_docs, val_docs, test_docs = (manifest.select(docs, s) for s in ds.SPLITS)
    lex = synthetic.synthetic_lexicon()
    vocab = build_vocab(train_docs)
    words = [synthetic.topical_word_vectors(16, seed=1), synthetic.topical_word_vectors(16, seed=2)]
    walks = kg.generate_corpus(synthetic.lexicon_graph(), kg.WalkConfig(5, 20, 0.1, 0))
    concepts = embed.train_skipgram(walks, embed.SkipGramConfig(dim=8, epochs=3, seed=0))
    base = model.ModelConfig(n=64, dw=16, dk=8, filters=16, hidden_dim=100, learning_rate=1e-3, epochs=50, seed=0)

    runs, detail = {}, {}
    for variant in model.VARIANTS:
        cfg = model.ablation_variant(base, variant, knowledge_dim=8)
        fb = model.FeatureBuilder(cfg, vocab, lex, words, concepts)
        enc = {name: [(encode(d, vocab, lex, cfg.n), int(d.is_positive)) for d in part]
               for name, part in (("train", train_docs), ("val", val_docs), ("test", test_docs))}
        ckpt, history = model.train(enc["train"], enc["val"], cfg, fb)
        assert len(history) == 50
        runs[variant] = {"synthetic": _f1(ckpt, enc["test"], fb)}
        detail[variant] = (_f1(ckpt, enc["train"], fb).f1, runs[variant]["synthetic"].f1)
    report = ablation_report(runs)
    elapsed = time.perf_counter() - start
    complete = all("—" not in cell for metric in ("f1", "precision", "recall") for row in report.rows(metric) for cell in row)
    train_f1, test_f1 = detail["kmcnn"]
    ok = train_f1 >= 99.0 and test_f1 >= 95.0 and complete and len(report.variants) == 4 and elapsed < 120
    criterion(ok, f"kmcnn train F1 {train_f1:.3f} (>= 99), held-out F1 {test_f1:.3f} (>= 95); "
                  f"report complete: {complete}; {elapsed:.1f} s (< 120 s)")


def _brute(pred, gold):
    tp = sum(p and g for p, g in zip(pred, gold))
    fp = sum(p and not g for p, g in zip(pred, gold))
    fn = sum(g and not p for p, g in zip(pred, gold))
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return 100 * prec, 100 * rec, 100 * f1


def test_metric_oracle(criterion):
    rng = np.random.default_rng(0)
    mismatches = 0
    for trial in range(1000):
        size = int(rng.integers(1, 50))
        pred, gold = rng.integers(2, size=size).tolist(), rng.integers(2, size=size).tolist()
        m = precision_recall_f1(confusion(list(enumerate(pred)), list(enumerate(gold))))
        mismatches += (m.precision, m.recall, m.f1) != _brute(pred, gold)
    hand = precision_recall_f1(ConfusionCounts(tp=3, fp=1, fn=1)).formatted()
    criterion(mismatches == 0 and hand == ("75.000", "75.000", "75.000"),
              f"{mismatches} mismatches on 1000 random cases; hand case {'/'.join(hand)}")


def test_split_soundness(criterion):
    rng = np.random.default_rng(0)
    cutoff = dt.date(2018, 1, 1)
    leaks = collisions = 0
    base = dt.date(2014, 1, 1)
    for i in range(500):
        size = int(rng.integers(1, 60))
        docs = [synthetic.Document(pmid=f"{i}-{j}", date=base + dt.timedelta(days=int(d)))
                for j, d in enumerate(rng.integers(0, 365 * 8, size=size))]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m = ds.asynchronous_split(docs, cutoff, 0.1, seed=i)
        dates = {d.pmid: d.date for d in docs}
        leaks += sum(dates[p] >= cutoff for p in m.train + m.validation)
        leaks += sum(dates[p] < cutoff for p in m.test)

        pool = synthetic.separable_documents(40, seed=i)
        positives = [d for d in pool if rng.random() < 0.3]
        pos_ids = {d.pmid for d in positives}
        free = sum(d.pmid not in pos_ids for d in pool)
        negs = ds.negative_sample_random(pool, int(rng.integers(0, free + 1)), positives, seed=i)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            spec = ds.NegativeSampleSpec("ambiguous", pool, 10, synthetic.GENES, synthetic.DISEASES, seed=i)
            negs += ds.negative_sample_ambiguous(spec, positives)
        collisions += sum(d.pmid in pos_ids for d in negs)
    criterion(leaks == 0 and collisions == 0,
              f"{leaks} temporal leaks over 500 date sets; {collisions} negative/positive pmid collisions")


def test_determinism_and_persistence(criterion, tmp_path):
    failures = []

    def stage(name, fn):
        a, b = fn(tmp_path / f"{name}-1"), fn(tmp_path / f"{name}-2")
        if a != b:
            failures.append(name)

    graph = synthetic.random_typed_graph(np.random.default_rng(0), 40, edge_prob=0.15)

    def walks(path):
        kg.generate_corpus(graph, kg.WalkConfig(3, 10, 0.2, 5), workers=2).write(path)
        return path.read_bytes()

    def vectors(path):
        corpus = kg.generate_corpus(graph, kg.WalkConfig(2, 8, 0.2, 5))
        embed.save_embeddings(embed.train_skipgram(corpus, embed.SkipGramConfig(dim=8, epochs=2, seed=3)), path)
        return path.read_bytes()

    docs = synthetic.separable_documents(60, seed=2)

    def split(path):
        ds.write_manifest(ds.synchronous_split(docs, seed=4), path)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ds.write_manifest(ds.asynchronous_split(docs, seed=4), path.with_suffix(".async"))
        return path.read_bytes() + path.with_suffix(".async").read_bytes()

    def negatives(path):
        pool = synthetic.separable_documents(80, seed=6)
        spec = ds.NegativeSampleSpec("ambiguous", pool, 10, synthetic.GENES, synthetic.DISEASES, seed=1)
        return [d.pmid for d in ds.negative_sample_random(pool, 10, docs, 1)] + [d.pmid for d in ds.negative_sample_ambiguous(spec, docs[:5])]

    lex = synthetic.synthetic_lexicon()
    vocab = build_vocab(docs)
    cfg = model.ModelConfig(n=32, dw=8, dk=4, filters=4, hidden_dim=8, epochs=3, learning_rate=1e-3, seed=9)
    rng = np.random.default_rng(0)
    concepts = embed.EmbeddingMatrix(lex.concept_keys, rng.standard_normal((len(lex.concept_keys), 4)))
    fb = model.FeatureBuilder(cfg, vocab, lex, [synthetic.topical_word_vectors(8, 1), synthetic.topical_word_vectors(8, 2)], concepts)
    enc = [(encode(d, vocab, lex, cfg.n), int(d.is_positive)) for d in docs]

    def training(path):
        ckpt, history = model.train(enc[:40], enc[40:], cfg, fb)
        model.save_checkpoint(ckpt, path)
        return path.read_bytes() + model.write_history(history).encode()

    for name, fn in (("walks", walks), ("vectors", vectors), ("split", split), ("negatives", negatives), ("train", training)):
        stage(name, fn)

    ckpt = model.load_checkpoint(tmp_path / "train-1")
    before = model.predict(model.train(enc[:40], enc[40:], cfg, fb)[0], [e for e, _ in enc], fb)
    after = model.predict(ckpt, [e for e, _ in enc], fb)
    if before != after:
        failures.append("checkpoint round trip")
    criterion(not failures, "byte-identical reruns of walks, vectors, splits, negatives, training; "
                            "bit-exact predictions after save/load" + (f"; FAILED: {failures}" if failures else ""))
