"""Typed concept graphs and the two random-walk strategies used to build
the concept-path corpus.

A graph holds concepts, each tagged with exactly one semantic type, and an
undirected edge set. Two walkers run over it:

* ``h_walk`` steps to a uniformly chosen direct neighbour (homophily).
* ``s_walk`` steps to a uniformly chosen concept whose neighbour-type
  signature lies inside an L-infinity box of half-width ``r`` around the
  current concept's signature (structural equivalence).
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import LookupFailure, ParseError, ReferentialError, ValidationError

__all__ = [
    "SemanticType",
    "KnowledgeGraph",
    "WalkConfig",
    "WalkCorpus",
    "load_graph",
    "signature",
    "h_walk",
    "s_walk",
    "structural_neighbors",
    "generate_corpus",
]

H_TAG = "H"
S_TAG = "S"
_STRATEGY_CODE = {H_TAG: 0, S_TAG: 1}

# slack for the hypercube test; signatures are ratios of small integers
_RADIUS_SLACK = 1e-12


@dataclass(frozen=True)
class SemanticType:
    id: int
    name: str


class KnowledgeGraph:
    """Immutable typed graph g = <V, E, C>.

    Concepts are kept in sorted id order, which is also the canonical
    order used when emitting walk corpora.
    """

    def __init__(
        self,
        concepts: Iterable[tuple[str, str, str]],
        edges: Iterable[tuple[str, str]],
        semantic_types: Sequence[str] | None = None,
    ):
        concepts = list(concepts)
        type_names: list[str] = list(semantic_types) if semantic_types is not None else []
        type_index = {name: i for i, name in enumerate(type_names)}
        if len(type_index) != len(type_names):
            raise ValidationError("duplicate semantic type names")

        names: dict[str, str] = {}
        ctype: dict[str, int] = {}
        for cid, name, tname in concepts:
            if cid in names:
                raise ValidationError(f"duplicate concept id {cid!r}")
            if tname not in type_index:
                if semantic_types is not None:
                    raise ValidationError(f"concept {cid!r} has unknown semantic type {tname!r}")
                type_index[tname] = len(type_names)
                type_names.append(tname)
            names[cid] = name
            ctype[cid] = type_index[tname]

        self.concept_ids: tuple[str, ...] = tuple(sorted(names))
        self._index = {cid: i for i, cid in enumerate(self.concept_ids)}
        self.names = tuple(names[c] for c in self.concept_ids)
        self.semantic_types = tuple(SemanticType(i, n) for i, n in enumerate(type_names))
        self.type_of = np.array([ctype[c] for c in self.concept_ids], dtype=np.int64)

        adj: list[set[int]] = [set() for _ in self.concept_ids]
        for a, b in edges:
            for end in (a, b):
                if end not in self._index:
                    raise ReferentialError(f"edge {a!r}-{b!r} references unknown concept {end!r}")
            if a == b:
                raise ValidationError(f"self-loop on concept {a!r}")
            ia, ib = self._index[a], self._index[b]
            adj[ia].add(ib)
            adj[ib].add(ia)
        self._adj = tuple(np.array(sorted(s), dtype=np.int64) for s in adj)
        self._signatures = self._compute_signatures()
        self._structural_cache: dict[float, tuple[np.ndarray, ...]] = {}

    # -- basic queries -----------------------------------------------------

    @property
    def num_concepts(self) -> int:
        return len(self.concept_ids)

    @property
    def num_edges(self) -> int:
        return sum(len(a) for a in self._adj) // 2

    @property
    def num_types(self) -> int:
        return len(self.semantic_types)

    def index(self, concept_id: str) -> int:
        try:
            return self._index[concept_id]
        except KeyError:
            raise LookupFailure(f"unknown concept {concept_id!r}") from None

    def __contains__(self, concept_id: object) -> bool:
        return concept_id in self._index

    def neighbors(self, concept_id: str) -> list[str]:
        return [self.concept_ids[j] for j in self._adj[self.index(concept_id)]]

    def degree(self, concept_id: str) -> int:
        return len(self._adj[self.index(concept_id)])

    def semantic_type(self, concept_id: str) -> SemanticType:
        return self.semantic_types[self.type_of[self.index(concept_id)]]

    def has_edge(self, a: str, b: str) -> bool:
        ia, ib = self.index(a), self.index(b)
        nbrs = self._adj[ia]
        pos = np.searchsorted(nbrs, ib)
        return bool(pos < len(nbrs) and nbrs[pos] == ib)

    def edges(self) -> list[tuple[str, str]]:
        out = []
        for i, nbrs in enumerate(self._adj):
            for j in nbrs:
                if i < j:
                    out.append((self.concept_ids[i], self.concept_ids[j]))
        return out

    # -- signatures --------------------------------------------------------

    def _compute_signatures(self) -> np.ndarray:
        sig = np.zeros((self.num_concepts, self.num_types), dtype=np.float64)
        for i, nbrs in enumerate(self._adj):
            if len(nbrs) == 0:
                continue
            counts = np.bincount(self.type_of[nbrs], minlength=self.num_types)
            sig[i] = counts / len(nbrs)
        return sig

    @property
    def signatures(self) -> np.ndarray:
        """Row i is the neighbour-type frequency vector of concept i."""
        view = self._signatures.view()
        view.flags.writeable = False
        return view

    def _structural_table(self, r: float) -> tuple[np.ndarray, ...]:
        # one linear scan per concept; cached per radius
        table = self._structural_cache.get(r)
        if table is None:
            sig = self._signatures
            rows = []
            for i in range(self.num_concepts):
                dist = np.max(np.abs(sig - sig[i]), axis=1) if self.num_types else np.zeros(self.num_concepts)
                hits = np.flatnonzero(dist <= r + _RADIUS_SLACK)
                rows.append(hits[hits != i])
            table = tuple(rows)
            self._structural_cache[r] = table
        return table


def load_graph(concepts_path: str | Path, edges_path: str | Path) -> KnowledgeGraph:
    """Read a graph from two TSV files.

    ``concepts_path`` rows are ``concept_id<TAB>name<TAB>semantic_type_name``;
    ``edges_path`` rows are ``concept_id<TAB>concept_id``. Blank lines are
    skipped and duplicate edges collapse.
    """
    concepts = []
    for lineno, cols in _read_tsv(concepts_path, 3):
        cid, name, tname = cols
        if not cid or any(ch.isspace() for ch in cid):
            raise ParseError(f"{concepts_path}:{lineno}: invalid concept id {cid!r}")
        if not tname:
            raise ParseError(f"{concepts_path}:{lineno}: empty semantic type")
        concepts.append((cid, name, tname))
    edges = [(a, b) for _, (a, b) in _read_tsv(edges_path, 2)]
    return KnowledgeGraph(concepts, edges)


def _read_tsv(path, ncols):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != ncols:
                raise ParseError(f"{path}:{lineno}: expected {ncols} tab-separated fields, got {len(cols)}")
            yield lineno, cols


def signature(g: KnowledgeGraph, v: str) -> np.ndarray:
    return g.signatures[g.index(v)].copy()


def structural_neighbors(g: KnowledgeGraph, v: str, r: float) -> set[str]:
    """Concepts u != v with max_c |sig(u)_c - sig(v)_c| <= r."""
    if r < 0:
        raise ValidationError("radius must be >= 0")
    i = g.index(v)
    return {g.concept_ids[j] for j in g._structural_table(float(r))[i]}


def _walk(start: int, length: int, candidates: Sequence[np.ndarray], rng: np.random.Generator) -> list[int]:
    path = [start]
    cur = start
    for _ in range(length):
        nbrs = candidates[cur]
        if len(nbrs) == 0:
            break
        cur = int(nbrs[rng.integers(len(nbrs))])
        path.append(cur)
    return path


def h_walk(g: KnowledgeGraph, x: str, l: int, rng: np.random.Generator) -> list[str]:
    if l < 1:
        raise ValidationError("walk length must be >= 1")
    return [g.concept_ids[i] for i in _walk(g.index(x), l, g._adj, rng)]


def s_walk(g: KnowledgeGraph, x: str, l: int, r: float, rng: np.random.Generator) -> list[str]:
    if l < 1:
        raise ValidationError("walk length must be >= 1")
    if r < 0:
        raise ValidationError("radius must be >= 0")
    table = g._structural_table(float(r))
    return [g.concept_ids[i] for i in _walk(g.index(x), l, table, rng)]


@dataclass(frozen=True)
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 40
    s_path_radius: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.walks_per_node < 1:
            raise ValidationError("walks_per_node must be >= 1")
        if self.walk_length < 1:
            raise ValidationError("walk_length must be >= 1")
        if self.s_path_radius < 0:
            raise ValidationError("s_path_radius must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a non-negative 64-bit integer")


@dataclass
class WalkCorpus:
    paths: list[list[str]] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.paths) != len(self.tags):
            raise ValidationError("paths and tags differ in length")
        bad = set(self.tags) - {H_TAG, S_TAG}
        if bad:
            raise ValidationError(f"unknown path tags {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.paths)

    def tagged(self, tag: str) -> list[list[str]]:
        return [p for p, t in zip(self.paths, self.tags) if t == tag]

    def to_text(self) -> str:
        buf = io.StringIO()
        for tag, path in zip(self.tags, self.paths):
            buf.write(tag + " " + " ".join(path) + "\n")
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def read(cls, path: str | Path) -> "WalkCorpus":
        paths, tags = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                if parts[0] not in (H_TAG, S_TAG) or len(parts) < 2:
                    raise ParseError(f"{path}:{lineno}: expected 'H' or 'S' followed by concept ids")
                tags.append(parts[0])
                paths.append(parts[1:])
        return cls(paths, tags)


def walk_rng(seed: int, concept_index: int, walk_index: int, tag: str) -> np.random.Generator:
    """Independent stream per (seed, concept, walk, strategy)."""
    return np.random.default_rng(np.random.SeedSequence([seed, concept_index, walk_index, _STRATEGY_CODE[tag]]))


def generate_corpus(g: KnowledgeGraph, cfg: WalkConfig, workers: int = 1) -> WalkCorpus:
    """All H-paths (by concept, then walk index), followed by all S-paths.

    Each walk draws from its own seeded stream, so ``workers > 1`` yields the
    same corpus as the serial run.
    """
    s_table = g._structural_table(float(cfg.s_path_radius))
    jobs = [
        (tag, i, w)
        for tag in (H_TAG, S_TAG)
        for i in range(g.num_concepts)
        for w in range(cfg.walks_per_node)
    ]

    def run(job):
        tag, i, w = job
        candidates = g._adj if tag == H_TAG else s_table
        return _walk(i, cfg.walk_length, candidates, walk_rng(cfg.seed, i, w, tag))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            walks = list(pool.map(run, jobs))
    else:
        walks = [run(j) for j in jobs]
    ids = g.concept_ids
    return WalkCorpus([[ids[i] for i in p] for p in walks], [j[0] for j in jobs])
