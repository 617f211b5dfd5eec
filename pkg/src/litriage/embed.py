"""Dense vector tables: skip-gram training over walk corpora and word2vec
text/binary I/O for pretrained word vectors."""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, FormatError, LookupFailure, ValidationError

__all__ = [
    "EmbeddingMatrix",
    "SkipGramConfig",
    "NegativeSampler",
    "train_skipgram",
    "skipgram_pairs",
    "load_word_vectors",
    "save_embeddings",
    "lookup",
]


class EmbeddingMatrix:
    """Key -> vector table with dense integer ids in insertion order."""

    def __init__(self, keys: Sequence[str], vectors, dim: int | None = None, meta: dict | None = None):
        keys = list(keys)
        vectors = np.asarray(vectors, dtype=np.float64)
        if dim is None:
            if vectors.ndim != 2:
                raise ValidationError("cannot infer dimension from an empty table")
            dim = vectors.shape[1]
        vectors = vectors.reshape(len(keys), dim)
        self.dim = int(dim)
        self.keys = keys
        self.vectors = vectors
        self.id_map: dict[str, int] = {}
        for i, k in enumerate(keys):
            if k in self.id_map:
                raise ValidationError(f"duplicate key {k!r}")
            self.id_map[k] = i
        self.meta = dict(meta or {})

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key: object) -> bool:
        return key in self.id_map

    def __getitem__(self, key: str) -> np.ndarray:
        return lookup(self, key, "error")

    def lookup(self, key: str, oov_policy: str = "zero") -> np.ndarray:
        return lookup(self, key, oov_policy)

    def table_for(self, keys: Iterable[str | None]) -> np.ndarray:
        """Stack vectors for ``keys`` in order; None or unknown keys give zero rows."""
        keys = list(keys)
        out = np.zeros((len(keys), self.dim))
        for row, k in enumerate(keys):
            i = self.id_map.get(k) if k is not None else None
            if i is not None:
                out[row] = self.vectors[i]
        return out

    def cosine(self, a: str, b: str) -> float:
        u, v = self[a], self[b]
        denom = np.linalg.norm(u) * np.linalg.norm(v)
        return float(u @ v / denom) if denom else 0.0


def lookup(m: EmbeddingMatrix, key: str, oov_policy: str = "zero") -> np.ndarray:
    if oov_policy not in ("zero", "error"):
        raise ConfigError(f"unknown OOV policy {oov_policy!r}")
    i = m.id_map.get(key)
    if i is None:
        if oov_policy == "error":
            raise LookupFailure(f"unknown key {key!r}")
        return np.zeros(m.dim)
    return m.vectors[i].copy()


# -- skip-gram ---------------------------------------------------------------


@dataclass(frozen=True)
class SkipGramConfig:
    dim: int = 108
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("dim", "window", "negatives", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")


MIN_LR_FRACTION = 1e-4


class NegativeSampler:
    """Draws ids with probability proportional to count ** 0.75."""

    def __init__(self, counts, power: float = 0.75):
        weights = np.asarray(counts, dtype=np.float64) ** power
        self.probs = weights / weights.sum()
        self._cdf = np.cumsum(self.probs)
        self._cdf[-1] = 1.0

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.searchsorted(self._cdf, rng.random(size), side="right")


def skipgram_pairs(path: Sequence[int], window: int):
    """(center, context) pairs with a fixed symmetric window, left to right."""
    n = len(path)
    for i, w in enumerate(path):
        for j in range(max(0, i - window), min(n, i + window + 1)):
            if j != i:
                yield w, path[j]


def _vocab_from(paths) -> tuple[list[str], np.ndarray]:
    counts = Counter(tok for p in paths for tok in p)
    keys = sorted(counts, key=lambda k: (-counts[k], k))
    return keys, np.array([counts[k] for k in keys], dtype=np.float64)


def _train_paths(paths, w_in, w_out, sampler, cfg, rng, clock, total, losses, epoch):
    """SGD over ``paths``; ``clock`` is a one-element list counting processed pairs.

    Per (center, context) pair the positive target and the negatives are
    scored against the current vectors, then all output rows and the
    center's input row are updated together.
    """
    lr0 = cfg.learning_rate
    for path in paths:
        for center, context in skipgram_pairs(path, cfg.window):
            lr = lr0 * max(MIN_LR_FRACTION, 1.0 - clock[0] / total)
            clock[0] += 1
            negs = sampler.draw(rng, cfg.negatives)
            targets = np.concatenate(([context], negs[negs != context]))
            labels = np.zeros(len(targets))
            labels[0] = 1.0
            u = w_in[center]
            v = w_out[targets]
            scores = v @ u
            # -log sigma(s) for the positive, -log sigma(-s) for negatives
            signed = np.where(labels > 0, scores, -scores)
            losses[epoch][0] += float(np.logaddexp(0.0, -signed).sum())
            losses[epoch][1] += 1
            g = (labels - 1.0 / (1.0 + np.exp(-scores))) * lr
            np.add.at(w_out, targets, np.outer(g, u))
            u += g @ v


def train_skipgram(corpus, cfg: SkipGramConfig = SkipGramConfig()) -> EmbeddingMatrix:
    """Skip-gram with negative sampling over concept paths.

    ``corpus`` is a ``WalkCorpus`` or any sequence of token sequences.
    Returns the input-side vectors; ``meta['loss_history']`` holds the mean
    per-pair loss of every epoch.
    """
    paths = corpus.paths if hasattr(corpus, "paths") else list(corpus)
    if not paths:
        raise ValidationError("empty corpus")
    if any(len(p) < 1 for p in paths):
        raise ValidationError("corpus contains an empty path")

    keys, counts = _vocab_from(paths)
    index = {k: i for i, k in enumerate(keys)}
    encoded = [[index[t] for t in p] for p in paths]
    rng = np.random.default_rng(cfg.seed)
    half = 0.5 / cfg.dim
    w_in = rng.uniform(-half, half, size=(len(keys), cfg.dim))
    w_out = np.zeros((len(keys), cfg.dim))
    sampler = NegativeSampler(counts)

    pairs_per_epoch = sum(sum(1 for _ in skipgram_pairs(p, cfg.window)) for p in encoded)
    total = max(1, pairs_per_epoch * cfg.epochs)
    losses = [[0.0, 0] for _ in range(cfg.epochs)]
    clock = [0]
    for epoch in range(cfg.epochs):
        if cfg.workers == 1:
            _train_paths(encoded, w_in, w_out, sampler, cfg, rng, clock, total, losses, epoch)
        else:
            _hogwild_epoch(encoded, w_in, w_out, sampler, cfg, rng, clock, total, losses, epoch)

    history = [s / c if c else float("nan") for s, c in losses]
    meta = {"loss_history": history, "deterministic": cfg.workers == 1}
    return EmbeddingMatrix(keys, w_in, cfg.dim, meta=meta)


def _hogwild_epoch(encoded, w_in, w_out, sampler, cfg, rng, clock, total, losses, epoch):
    # unsynchronised shared updates; results depend on thread scheduling
    shards = [encoded[i :: cfg.workers] for i in range(cfg.workers)]
    seeds = rng.integers(0, 2**63, size=cfg.workers)
    threads = [
        threading.Thread(
            target=_train_paths,
            args=(shard, w_in, w_out, sampler, cfg, np.random.default_rng(s), clock, total, losses, epoch),
        )
        for shard, s in zip(shards, seeds)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


# -- word2vec formats --------------------------------------------------------


def load_word_vectors(path: str | Path, format: str = "text") -> EmbeddingMatrix:
    """Read a word2vec file (``text`` or ``binary``)."""
    if format == "text":
        return _load_text(path)
    if format == "binary":
        return _load_binary(path)
    raise ConfigError(f"unknown word2vec format {format!r}")


def _parse_header(line: str, path) -> tuple[int, int]:
    parts = line.split()
    try:
        count, dim = (int(p) for p in parts)
    except ValueError:
        raise FormatError(f"{path}: bad header {line.strip()!r}, expected 'count dim'") from None
    if count < 0 or dim < 1:
        raise FormatError(f"{path}: bad header {line.strip()!r}")
    return count, dim


def _load_text(path) -> EmbeddingMatrix:
    with open(path, encoding="utf-8") as fh:
        count, dim = _parse_header(fh.readline(), path)
        keys: list[str] = []
        seen: set[str] = set()
        vectors = np.zeros((count, dim))
        for line in fh:
            parts = line.rstrip("\r\n").split(" ")
            if not line.strip():
                continue
            token, values = parts[0], [p for p in parts[1:] if p]
            if len(keys) == count:
                raise FormatError(f"{path}: more than {count} vectors (extra token {token!r})")
            if len(values) != dim:
                raise FormatError(f"{path}: token {token!r} has {len(values)} values, expected {dim}")
            if token in seen:
                raise FormatError(f"{path}: duplicate token {token!r}")
            try:
                vectors[len(keys)] = [float(v) for v in values]
            except ValueError:
                raise FormatError(f"{path}: non-numeric value for token {token!r}") from None
            seen.add(token)
            keys.append(token)
    if len(keys) != count:
        raise FormatError(f"{path}: header declares {count} vectors, found {len(keys)}")
    return EmbeddingMatrix(keys, vectors, dim)


def _load_binary(path) -> EmbeddingMatrix:
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing header line")
    count, dim = _parse_header(data[:nl].decode("ascii", "replace"), path)
    pos = nl + 1
    width = 4 * dim
    keys: list[str] = []
    seen: set[str] = set()
    vectors = np.zeros((count, dim))
    for row in range(count):
        while pos < len(data) and data[pos : pos + 1] == b"\n":
            pos += 1
        sp = data.find(b" ", pos)
        if sp < 0:
            raise FormatError(f"{path}: truncated after {row} of {count} vectors")
        token = data[pos:sp].decode("utf-8")
        start = sp + 1
        if start + width > len(data):
            raise FormatError(f"{path}: token {token!r} has a truncated vector, expected {dim} values")
        if token in seen:
            raise FormatError(f"{path}: duplicate token {token!r}")
        vectors[row] = np.frombuffer(data, dtype="<f4", count=dim, offset=start)
        seen.add(token)
        keys.append(token)
        pos = start + width
    if data[pos:].strip(b"\n"):
        raise FormatError(f"{path}: trailing data after {count} vectors")
    return EmbeddingMatrix(keys, vectors, dim)


def save_embeddings(m: EmbeddingMatrix, path: str | Path, format: str = "text", precision: int = 6) -> None:
    """Write ``m`` in word2vec ``text`` or ``binary`` layout."""
    if len(m) == 0:
        raise ValidationError("refusing to write an empty embedding table")
    for k in m.keys:
        if not k or any(ch.isspace() for ch in k):
            raise ValidationError(f"token {k!r} cannot be stored in word2vec format")
    if format == "text":
        fmt = f"%.{precision}f"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{len(m)} {m.dim}\n")
            for k, vec in zip(m.keys, m.vectors):
                fh.write(k + " " + " ".join(fmt % x for x in vec) + "\n")
    elif format == "binary":
        with open(path, "wb") as fh:
            fh.write(f"{len(m)} {m.dim}\n".encode("ascii"))
            for k, vec in zip(m.keys, m.vectors):
                fh.write(k.encode("utf-8") + b" ")
                fh.write(np.asarray(vec, dtype="<f4").tobytes())
                fh.write(b"\n")
    else:
        raise ConfigError(f"unknown word2vec format {format!r}")
