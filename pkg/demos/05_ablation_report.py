"""
Ablation report
===============

Four variants differ in channels and knowledge: a single-channel word CNN, a
two-channel word CNN, a single channel with concept vectors, and two channels
with concept vectors. The report lays out one metric per variant and dataset,
next to the reference numbers shipped with the package.
"""

from litriage import datasets as ds, embed, kg, model, synthetic
from litriage.evaluation import ablation_report, confusion, precision_recall_f1, reference_tables
from litriage.text import build_vocab, encode

lex = synthetic.synthetic_lexicon()
words = [synthetic.topical_word_vectors(16, seed=1), synthetic.topical_word_vectors(16, seed=2)]
walks = kg.generate_corpus(synthetic.lexicon_graph(), kg.WalkConfig(5, 20, 0.1, 0))
concepts = embed.train_skipgram(walks, embed.SkipGramConfig(dim=8, epochs=3, seed=0))
base = model.ModelConfig(n=64, dw=16, dk=8, filters=16, hidden_dim=100, learning_rate=1e-3, epochs=20, seed=0)

# two synthetic datasets stand in for separate curation tasks
datasets = {"synthetic-a": synthetic.separable_documents(150, seed=0),
            "synthetic-b": synthetic.separable_documents(150, seed=5)}

runs = {}
for name, docs in datasets.items():
    manifest = ds.synchronous_split(docs, (0.7, 0.1, 0.2), seed=0)
    train_docs, val_docs, test_docs = (manifest.select(docs, s) for s in ds.SPLITS)
    vocab = build_vocab(train_docs)
    for variant in model.VARIANTS:
        cfg = model.ablation_variant(base, variant, knowledge_dim=8)
        fb = model.FeatureBuilder(cfg, vocab, lex, words, concepts)
        enc = {s: [(encode(d, vocab, lex, cfg.n), int(d.is_positive)) for d in part]
               for s, part in (("train", train_docs), ("val", val_docs), ("test", test_docs))}
        ckpt, _ = model.train(enc["train"], enc["val"], cfg, fb)
        preds = model.predict(ckpt, [e for e, _ in enc["test"]], fb)
        gold = [(e.pmid, y) for e, y in enc["test"]]
        runs.setdefault(variant, {})[name] = precision_recall_f1(confusion([(p, lab) for p, lab, _ in preds], gold))

report = ablation_report(runs)
for metric in ("f1", "precision", "recall"):
    print(metric)
    print(report.to_text(metric))
    print()
print("reference F1:")
print(reference_tables().to_text())
