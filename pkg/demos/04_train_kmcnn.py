"""
Training the knowledge-enhanced multi-channel CNN
=================================================

Each document becomes a stack of channels: word vectors from two embedding
tables, each followed by the concept vectors of linked entities. Convolutions
of widths 1, 2 and 3 slide over the tokens, max-pooling keeps the strongest
response of every filter, and a small dense head classifies.
"""

from pathlib import Path

from litriage import datasets as ds, embed, kg, model, synthetic
from litriage.evaluation import confusion, precision_recall_f1
from litriage.text import build_vocab, encode

docs = synthetic.separable_documents(200, seed=0)
manifest = ds.synchronous_split(docs, (0.7, 0.1, 0.2), seed=0)
train_docs, val_docs, test_docs = (manifest.select(docs, s) for s in ds.SPLITS)

vocab = build_vocab(train_docs)
lex = synthetic.synthetic_lexicon()
words = [synthetic.topical_word_vectors(16, seed=1), synthetic.topical_word_vectors(16, seed=2)]
walks = kg.generate_corpus(synthetic.lexicon_graph(), kg.WalkConfig(5, 20, 0.1, 0))
concepts = embed.train_skipgram(walks, embed.SkipGramConfig(dim=8, epochs=3, seed=0))

cfg = model.ModelConfig(n=64, dw=16, dk=8, filters=16, hidden_dim=100, learning_rate=1e-3, epochs=20, seed=0)
features = model.FeatureBuilder(cfg, vocab, lex, words, concepts)


def encoded(part):
    return [(encode(d, vocab, lex, cfg.n), int(d.is_positive)) for d in part]


ckpt, history = model.train(encoded(train_docs), encoded(val_docs), cfg, features)
print(model.write_history(history))

# checkpoints reload bit-exactly
path = Path("/tmp/demo.kmc")
model.save_checkpoint(ckpt, path)
reloaded = model.load_checkpoint(path)

test = encoded(test_docs)
preds = model.predict(reloaded, [e for e, _ in test], features)
m = precision_recall_f1(confusion([(p, lab) for p, lab, _ in preds], [(e.pmid, y) for e, y in test]))
print("test P/R/F1:", "/".join(m.formatted()))
