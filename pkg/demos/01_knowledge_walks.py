"""
Random walks over a typed concept graph
=======================================

Two walk strategies turn a graph into sentences of concept ids. Hierarchical
walks follow edges; structural walks jump between concepts whose neighbourhood
type profiles are close.
"""

import numpy as np

from litriage import kg, synthetic

# a star: four t1 leaves around one t2 hub
g = synthetic.star_graph(leaves=4)
print("concepts:", g.concept_ids)
print("types:   ", [t.name for t in g.semantic_types])

# a signature counts neighbours of each type, normalised by degree
for c in g.concept_ids:
    print(f"  signature({c}) = {kg.signature(g, c)}")

# leaves share a profile, so structural walks hop among them
rng = np.random.default_rng(0)
print("H walk from leaf:", kg.h_walk(g, g.concept_ids[1], 6, rng))
print("S walk from leaf:", kg.s_walk(g, g.concept_ids[1], 6, 0.1, rng))

# the full corpus holds walks_per_node walks of each kind for every concept
corpus = kg.generate_corpus(g, kg.WalkConfig(walks_per_node=2, walk_length=5, s_path_radius=0.1, seed=0))
print(f"{len(corpus)} walks, first H then S:")
for tag, path in zip(corpus.tags, corpus.paths):
    print(f"  {tag}  {' '.join(path)}")
