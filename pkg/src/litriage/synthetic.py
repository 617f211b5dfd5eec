"""Small generated inputs standing in for licensed / full-scale resources:
typed graphs, a separable document collection, toy word vectors and
lexicons."""

from __future__ import annotations

import datetime as dt
from typing import Sequence

import numpy as np

from .embed import EmbeddingMatrix
from .kg import KnowledgeGraph
from .text import ConceptLexicon, Document, tokenize

__all__ = [
    "star_graph",
    "triangle_graph",
    "clique_pair",
    "random_typed_graph",
    "separable_documents",
    "random_word_vectors",
    "GENES",
    "DISEASES",
]


def star_graph(leaves: int = 4, leaf_type: str = "t1", center_type: str = "t2") -> KnowledgeGraph:
    concepts = [("center", "center", center_type)]
    concepts += [(f"leaf{i}", f"leaf {i}", leaf_type) for i in range(leaves)]
    return KnowledgeGraph(concepts, [("center", f"leaf{i}") for i in range(leaves)])


def triangle_graph() -> KnowledgeGraph:
    concepts = [(c, c, "t1") for c in "ABC"]
    return KnowledgeGraph(concepts, [("A", "B"), ("B", "C"), ("A", "C")])


def clique_pair(size: int = 8, semantic_type: str = "t1") -> KnowledgeGraph:
    """Two disjoint cliques a0..a{size-1} and b0..b{size-1} of one semantic type."""
    concepts, edges = [], []
    for side in "ab":
        names = [f"{side}{i}" for i in range(size)]
        concepts += [(n, n, semantic_type) for n in names]
        edges += [(names[i], names[j]) for i in range(size) for j in range(i + 1, size)]
    return KnowledgeGraph(concepts, edges)


def random_typed_graph(
    rng: np.random.Generator, num_nodes: int, num_types: int = 4, edge_prob: float = 0.08
) -> KnowledgeGraph:
    types = [f"T{t}" for t in range(num_types)]
    concepts = [(f"C{i:04d}", f"concept {i}", types[rng.integers(num_types)]) for i in range(num_nodes)]
    upper = np.triu(rng.random((num_nodes, num_nodes)) < edge_prob, k=1)
    edges = [(f"C{i:04d}", f"C{j:04d}") for i, j in zip(*np.nonzero(upper))]
    return KnowledgeGraph(concepts, edges, semantic_types=types)


GENES = ("brca1", "brca2", "tp53", "apoe", "fto", "tcf7l2", "cftr", "mthfr")
DISEASES = ("breast cancer", "diabetes", "obesity", "alzheimer disease", "asthma", "schizophrenia")
SIGNAL = ("gwas", "genome-wide", "snp", "allele", "genotype", "locus", "polymorphism", "association")
FILLER = (
    "patients clinical treatment outcome hospital therapy protein cell study review method results "
    "analysis data model trial cohort imaging surgery dose response sample tissue expression level "
    "pathway signal receptor membrane culture assay measurement effect group control baseline"
).split()


def separable_documents(
    num_docs: int = 200,
    seed: int = 0,
    min_len: int = 20,
    max_len: int = 50,
    start: dt.date = dt.date(2015, 1, 1),
    end: dt.date = dt.date(2020, 12, 31),
) -> list[Document]:
    """Half positive, half negative; positives and only positives contain
    signal words, so the labels are a keyword function of the text."""
    rng = np.random.default_rng(seed)
    span = (end - start).days
    docs = []
    for i in range(num_docs):
        positive = i % 2 == 0
        length = int(rng.integers(min_len, max_len + 1))
        words = [FILLER[j] for j in rng.integers(len(FILLER), size=length)]
        if positive:
            for pos in rng.choice(length, size=3, replace=False):
                words[pos] = SIGNAL[rng.integers(len(SIGNAL))]
        if rng.random() < 0.5:
            words[rng.integers(length)] = GENES[rng.integers(len(GENES))]
        if rng.random() < 0.5:
            words[rng.integers(length)] = DISEASES[rng.integers(len(DISEASES))]
        docs.append(
            Document(
                pmid=str(10_000_000 + i),
                title=" ".join(words[:6]),
                abstract=" ".join(words[6:]),
                journal="Synthetic Journal",
                pub_type="Journal Article",
                date=start + dt.timedelta(days=int(rng.integers(span + 1))),
                label="positive" if positive else "negative",
            )
        )
    return docs


def random_word_vectors(tokens: Sequence[str], dim: int, seed: int = 0, scale: float = 1.0) -> EmbeddingMatrix:
    rng = np.random.default_rng(seed)
    return EmbeddingMatrix(list(tokens), rng.normal(0.0, scale, size=(len(tokens), dim)), dim)


def topical_word_vectors(dim: int, seed: int = 0, offset: float = 1.0) -> EmbeddingMatrix:
    """Random vectors for the synthetic vocabulary in which the signal words
    share a common direction, as topically related words do in pretrained
    tables."""
    tokens = vocabulary_tokens()
    rng = np.random.default_rng(seed)
    vecs = rng.normal(0.0, 1.0, size=(len(tokens), dim))
    topic = rng.normal(0.0, 1.0, size=dim)
    topic *= offset * np.sqrt(dim) / np.linalg.norm(topic)
    signal = {t for s in SIGNAL for t in tokenize(s)}
    for i, t in enumerate(tokens):
        if t in signal:
            vecs[i] += topic
    return EmbeddingMatrix(tokens, vecs, dim)


def synthetic_lexicon() -> ConceptLexicon:
    """Gene and disease phrases mapped to graph-style concept ids."""
    entries = [(g, f"G{i:03d}") for i, g in enumerate(GENES)]
    entries += [(d, f"D{i:03d}") for i, d in enumerate(DISEASES)]
    return ConceptLexicon(entries)


def lexicon_graph(seed: int = 0) -> KnowledgeGraph:
    """Typed graph over the synthetic lexicon's concepts: genes link to diseases."""
    rng = np.random.default_rng(seed)
    concepts = [(f"G{i:03d}", g, "Gene or Genome") for i, g in enumerate(GENES)]
    concepts += [(f"D{i:03d}", d, "Disease or Syndrome") for i, d in enumerate(DISEASES)]
    edges = []
    for i in range(len(GENES)):
        for j in rng.choice(len(DISEASES), size=2, replace=False):
            edges.append((f"G{i:03d}", f"D{j:03d}"))
    for i in range(len(GENES) - 1):
        edges.append((f"G{i:03d}", f"G{i + 1:03d}"))
    return KnowledgeGraph(concepts, edges)


def vocabulary_tokens() -> list[str]:
    toks = set(FILLER) | set(SIGNAL) | set(GENES)
    for d in DISEASES:
        toks.update(tokenize(d))
    toks.update(tokenize("Synthetic Journal Journal Article"))
    return sorted(toks)
