"""
Skip-gram embeddings for concepts
=================================

Walk sentences feed a skip-gram model with negative sampling. Concepts that
co-occur on walks end up with similar vectors.
"""

import numpy as np

from litriage import embed, kg, synthetic

# two disjoint 8-cliques: walks never cross between them
g = synthetic.clique_pair(8)
corpus = kg.generate_corpus(g, kg.WalkConfig(5, 20, 0.0, seed=0))
model = embed.train_skipgram(corpus.tagged("H"), embed.SkipGramConfig(dim=16, window=2, negatives=5, epochs=5, seed=0))

keys = [f"{s}{i}" for s in "ab" for i in range(8)]
v = model.table_for(keys)
v /= np.linalg.norm(v, axis=1, keepdims=True)
cos = v @ v.T

# mean cosine within each clique against across cliques
within = (cos[:8, :8].sum() - 8 + cos[8:, 8:].sum() - 8) / (2 * 56)
across = cos[:8, 8:].mean()
print(f"within-clique cosine {within:.3f}, across {across:.3f}, gap {within - across:.3f}")

# vectors round-trip through the word2vec text format
embed.save_embeddings(model, "/tmp/cliques.vec")
back = embed.load_word_vectors("/tmp/cliques.vec")
print("round trip max abs diff:", float(np.max(np.abs(back.table_for(keys) - model.table_for(keys)))))
