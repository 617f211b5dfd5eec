"""Knowledge-enhanced multi-channel CNN for document triage.

Each document enters as ``channels`` matrices of shape n x (dw + dk): one
word-vector table per channel, with the token's concept vector appended.
For every filter width the same filter bank convolves each channel, the
per-channel feature maps are averaged, passed through the nonlinearity
and max-pooled over time. The pooled features go through one hidden
layer, dropout and a two-way softmax (index 1 = positive).
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import nn
from .embed import EmbeddingMatrix
from .errors import CompatibilityError, ConfigError, DataError, FormatError, ShapeError
from .evaluation import Metrics, confusion, precision_recall_f1
from .text import ConceptLexicon, EncodedDocument, Vocabulary

__all__ = [
    "ModelConfig",
    "KMCNN",
    "FeatureBuilder",
    "ModelCheckpoint",
    "EpochRecord",
    "build_inputs",
    "ablation_variant",
    "train",
    "predict",
    "save_checkpoint",
    "load_checkpoint",
    "write_history",
]

DEFAULT_KNOWLEDGE_DIM = 108
DESK_FILTERS = 64
VARIANTS = ("plain_cnn", "mcnn", "kcnn", "kmcnn")
NEGATIVE, POSITIVE = 0, 1


@dataclass(frozen=True)
class ModelConfig:
    n: int = 1000
    dw: int = 200
    dk: int = DEFAULT_KNOWLEDGE_DIM
    channels: int = 2
    filter_widths: tuple[int, ...] = (1, 2, 3)
    filters: int = 2048
    # "per_width": ``filters`` banks per width; "total": split across widths
    filter_count: str = "per_width"
    hidden_dim: int = 100
    drop_rate: float = 0.5
    learning_rate: float = 1e-5
    epochs: int = 50
    batch_size: int = 32
    optimizer: str = "adam"
    activation: str = "relu"
    # False keeps the concept block in the first channel only
    share_knowledge: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "filter_widths", tuple(int(h) for h in self.filter_widths))
        if self.channels not in (1, 2):
            raise ConfigError("channels must be 1 or 2")
        if self.n < 1 or self.dw < 1 or self.dk < 0:
            raise ConfigError("n and dw must be >= 1 and dk >= 0")
        if not self.filter_widths or any(h < 1 or h > self.n for h in self.filter_widths):
            raise ConfigError(f"filter widths {self.filter_widths} must lie in [1, n={self.n}]")
        if self.filter_count not in ("per_width", "total"):
            raise ConfigError(f"unknown filter_count mode {self.filter_count!r}")
        if self.filters_per_width < 1:
            raise ConfigError("need at least one filter per width")
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be >= 1")
        if not 0 <= self.drop_rate < 1:
            raise ConfigError("drop_rate must lie in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.activation not in ("relu", "tanh"):
            raise ConfigError(f"unknown activation {self.activation!r}")

    @property
    def k(self) -> int:
        return self.dw + self.dk

    @property
    def filters_per_width(self) -> int:
        if self.filter_count == "total":
            return self.filters // len(self.filter_widths)
        return self.filters

    @property
    def feature_width(self) -> int:
        return len(self.filter_widths) * self.filters_per_width

    @classmethod
    def desk(cls, **overrides) -> "ModelConfig":
        return cls(**{"filters": DESK_FILTERS, **overrides})

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["filter_widths"] = list(self.filter_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys {sorted(unknown)}")
        return cls(**d)


def ablation_variant(cfg: ModelConfig, variant: str, knowledge_dim: int = DEFAULT_KNOWLEDGE_DIM) -> ModelConfig:
    """plain_cnn/mcnn drop the concept block; kcnn/plain_cnn use one channel."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    channels = 2 if variant in ("mcnn", "kmcnn") else 1
    dk = knowledge_dim if variant in ("kcnn", "kmcnn") else 0
    return dataclasses.replace(cfg, channels=channels, dk=dk)


# -- inputs ------------------------------------------------------------------


class FeatureBuilder:
    """Turns encoded documents into (channels, n, k) input arrays.

    Word tables are indexed by vocabulary id and the concept table by
    lexicon concept id; padding, OOV and "no concept" rows are zero.
    Embedding rows are frozen.
    """

    def __init__(
        self,
        cfg: ModelConfig,
        vocab: Vocabulary,
        lexicon: ConceptLexicon,
        word_vectors: Sequence[EmbeddingMatrix],
        concept_vectors: EmbeddingMatrix | None = None,
    ):
        if len(word_vectors) < cfg.channels:
            raise ConfigError(f"{cfg.channels} channels need {cfg.channels} word-vector tables, got {len(word_vectors)}")
        for wv in word_vectors[: cfg.channels]:
            if wv.dim != cfg.dw:
                raise ConfigError(f"word vectors have dimension {wv.dim}, config expects dw={cfg.dw}")
        if cfg.dk:
            if concept_vectors is None:
                raise ConfigError("dk > 0 requires concept vectors")
            if concept_vectors.dim != cfg.dk:
                raise ConfigError(f"concept vectors have dimension {concept_vectors.dim}, config expects dk={cfg.dk}")
        self.cfg = cfg
        self.vocab = vocab
        self.lexicon = lexicon
        keys = [None, None] + vocab.tokens[2:]
        self.word_tables = [wv.table_for(keys) for wv in word_vectors[: cfg.channels]]
        self.concept_table = (
            concept_vectors.table_for([None] + lexicon.concept_keys) if cfg.dk else np.zeros((len(lexicon.concept_keys) + 1, 0))
        )

    @property
    def vocab_hash(self) -> str:
        return self.vocab.fingerprint()

    @property
    def lexicon_hash(self) -> str:
        return self.lexicon.fingerprint()

    @property
    def features_hash(self) -> str:
        h = hashlib.sha256()
        for t in self.word_tables + [self.concept_table]:
            h.update(np.ascontiguousarray(t, dtype="<f8").tobytes())
        return h.hexdigest()

    def build(self, e: EncodedDocument) -> np.ndarray:
        cfg = self.cfg
        if e.length != cfg.n:
            raise ShapeError(f"document {e.pmid!r} encoded to length {e.length}, model expects n={cfg.n}")
        out = np.zeros((cfg.channels, cfg.n, cfg.k))
        knowledge = self.concept_table[e.concept_ids]
        for c, table in enumerate(self.word_tables):
            out[c, :, : cfg.dw] = table[e.token_ids]
            if cfg.dk and (c == 0 or cfg.share_knowledge):
                out[c, :, cfg.dw :] = knowledge
        return out

    def build_batch(self, docs: Sequence[EncodedDocument]) -> np.ndarray:
        return np.stack([self.build(e) for e in docs]) if docs else np.zeros((0, self.cfg.channels, self.cfg.n, self.cfg.k))


def build_inputs(
    e: EncodedDocument,
    ch1: EmbeddingMatrix,
    ch2: EmbeddingMatrix | None,
    kg: EmbeddingMatrix | None,
    cfg: ModelConfig,
    vocab: Vocabulary,
    lexicon: ConceptLexicon,
) -> list[np.ndarray]:
    """One n x k matrix per channel."""
    tables = [ch1] if cfg.channels == 1 else [ch1, ch2]
    if any(t is None for t in tables):
        raise ConfigError("missing word-vector table for a configured channel")
    return list(FeatureBuilder(cfg, vocab, lexicon, tables, kg).build(e))


# -- network -----------------------------------------------------------------


class KMCNN:
    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        m = cfg.filters_per_width
        self.convs = [nn.Conv1D(cfg.k, h, m, rng) for h in cfg.filter_widths]
        act = nn.ReLU if cfg.activation == "relu" else nn.Tanh
        self.conv_acts = [act() for _ in cfg.filter_widths]
        self.pools = [nn.MaxPoolOverTime() for _ in cfg.filter_widths]
        self.hidden = nn.Dense(cfg.feature_width, cfg.hidden_dim, rng)
        self.hidden_act = nn.ReLU()
        self.drop = nn.Dropout(cfg.drop_rate)
        self.output = nn.Dense(cfg.hidden_dim, 2, rng)
        self.loss_layer = nn.SoftmaxCrossEntropy()

    def _layers(self):
        for h, conv in zip(self.cfg.filter_widths, self.convs):
            yield f"conv{h}", conv
        yield "hidden", self.hidden
        yield "output", self.output

    def parameters(self) -> dict[str, np.ndarray]:
        """Live parameter arrays in canonical order (``layer.name``)."""
        return {f"{ln}.{pn}": p for ln, layer in self._layers() for pn, p in layer.params.items()}

    def gradients(self) -> dict[str, np.ndarray]:
        return {f"{ln}.{pn}": g for ln, layer in self._layers() for pn, g in layer.grads.items()}

    def load_parameters(self, params: dict[str, np.ndarray]) -> None:
        live = self.parameters()
        if live.keys() != params.keys():
            raise CompatibilityError(f"parameter names differ: {sorted(set(live) ^ set(params))}")
        for k, p in params.items():
            if live[k].shape != p.shape:
                raise CompatibilityError(f"parameter {k} has shape {p.shape}, model expects {live[k].shape}")
            live[k][...] = p

    def zero_grad(self) -> None:
        for _, layer in self._layers():
            layer.zero_grad()

    def _as_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 3:
            x = x[None]
        cfg = self.cfg
        if x.ndim != 4 or x.shape[1:] != (cfg.channels, cfg.n, cfg.k):
            raise ShapeError(f"expected input (batch, {cfg.channels}, {cfg.n}, {cfg.k}), got {x.shape}")
        return x

    def features(self, x: np.ndarray) -> np.ndarray:
        """Pooled representation, shape (batch, len(filter_widths) * M)."""
        x = self._as_batch(x)
        pooled = []
        for conv, act, pool in zip(self.convs, self.conv_acts, self.pools):
            maps = conv.forward(x).mean(axis=1)
            pooled.append(pool.forward(act.forward(maps)))
        return np.concatenate(pooled, axis=-1)

    def logits(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        feats = self.features(x)
        h = self.hidden_act.forward(self.hidden.forward(feats))
        h = self.drop.forward(h, train=train, rng=rng)
        return self.output.forward(h)

    def forward(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        """Class probabilities, shape (batch, 2)."""
        return nn.softmax(self.logits(x, train, rng))

    def loss(self, x, labels, train: bool = True, rng=None) -> float:
        return self.loss_layer.forward(self.logits(x, train, rng), labels)

    def backward(self) -> None:
        """Accumulate parameter gradients of the last ``loss`` call."""
        d = self.loss_layer.backward(1.0)
        d = self.output.backward(d)
        d = self.drop.backward(d)
        d = self.hidden.backward(self.hidden_act.backward(d))
        m = self.cfg.filters_per_width
        channels = self.cfg.channels
        for i, (conv, act, pool) in enumerate(zip(self.convs, self.conv_acts, self.pools)):
            dmaps = act.backward(pool.backward(d[:, i * m : (i + 1) * m]))
            dy = np.broadcast_to(dmaps[:, None] / channels, dmaps.shape[:1] + (channels,) + dmaps.shape[1:])
            conv.backward(dy)

    def loss_and_grad(self, x, labels, rng=None, train: bool = True) -> tuple[float, dict[str, np.ndarray]]:
        self.zero_grad()
        value = self.loss(x, labels, train=train, rng=rng)
        self.backward()
        return value, self.gradients()


# -- checkpoints -------------------------------------------------------------

MAGIC = b"KMC1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHI")


@dataclass
class ModelCheckpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    vocab_hash: str = ""
    lexicon_hash: str = ""
    features_hash: str = ""
    format_version: int = FORMAT_VERSION

    @property
    def seed(self) -> int:
        return self.config.seed

    def model(self) -> KMCNN:
        m = KMCNN(self.config)
        m.load_parameters(self.params)
        return m


def save_checkpoint(ckpt: ModelCheckpoint, path: str | Path) -> None:
    """Magic, version, JSON header, then float64 little-endian tensors in header order."""
    header = {
        "config": ckpt.config.to_dict(),
        "vocab_hash": ckpt.vocab_hash,
        "lexicon_hash": ckpt.lexicon_hash,
        "features_hash": ckpt.features_hash,
        "tensors": [[name, list(p.shape)] for name, p in ckpt.params.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for p in ckpt.params.values():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated checkpoint header")
    magic, version, hlen = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: checkpoint format version {version} unsupported (this build reads {FORMAT_VERSION})")
    start = _HEADER.size
    if len(data) < start + hlen:
        raise FormatError(f"{path}: truncated checkpoint header")
    try:
        header = json.loads(data[start : start + hlen].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        tensors = header["tensors"]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: corrupt checkpoint header ({exc})") from None
    pos = start + hlen
    params = {}
    for name, shape in tensors:
        count = int(np.prod(shape, dtype=np.int64))
        end = pos + 8 * count
        if end > len(data):
            raise FormatError(f"{path}: truncated while reading tensor {name}")
        params[name] = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape).astype(np.float64)
        pos = end
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} unexpected trailing bytes")
    return ModelCheckpoint(
        config,
        params,
        header.get("vocab_hash", ""),
        header.get("lexicon_hash", ""),
        header.get("features_hash", ""),
        version,
    )


# -- training / prediction ---------------------------------------------------


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_precision: float
    val_recall: float
    val_f1: float


def write_history(history: Sequence[EpochRecord], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "val_precision", "val_recall", "val_f1"])
    for r in history:
        w.writerow([r.epoch, repr(r.train_loss), f"{r.val_precision:.3f}", f"{r.val_recall:.3f}", f"{r.val_f1:.3f}"])
    if path is not None:
        Path(path).write_text(buf.getvalue(), encoding="utf-8")
    return buf.getvalue()


def _scores(model: KMCNN, features: FeatureBuilder, docs: Sequence[EncodedDocument], batch: int) -> np.ndarray:
    out = []
    for i in range(0, len(docs), batch):
        out.append(model.forward(features.build_batch(docs[i : i + batch]))[:, POSITIVE])
    return np.concatenate(out) if out else np.zeros(0)


def _metrics(scores: np.ndarray, labels: np.ndarray) -> Metrics:
    pred = [(str(i), int(s >= 0.5)) for i, s in enumerate(scores)]
    gold = [(str(i), int(y)) for i, y in enumerate(labels)]
    return precision_recall_f1(confusion(pred, gold))


def _split(pairs):
    docs = [d for d, _ in pairs]
    labels = np.array([int(y) for _, y in pairs], dtype=np.int64)
    return docs, labels


def train(
    train_set: Sequence[tuple[EncodedDocument, int]],
    val_set: Sequence[tuple[EncodedDocument, int]],
    cfg: ModelConfig,
    features: FeatureBuilder,
) -> tuple[ModelCheckpoint, list[EpochRecord]]:
    """Mini-batch training; returns the checkpoint with the best validation F1
    (later epochs win ties) and one history record per epoch."""
    if features.cfg != cfg:
        raise ConfigError("feature builder was created for a different model config")
    docs, labels = _split(train_set)
    if not docs:
        raise DataError("empty training set")
    if len(set(labels.tolist())) < 2:
        raise DataError("training set contains a single label")
    val_docs, val_labels = _split(val_set)

    model = KMCNN(cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    adam = nn.AdamState()

    def snapshot():
        return ModelCheckpoint(
            cfg,
            {k: p.copy() for k, p in model.parameters().items()},
            features.vocab_hash,
            features.lexicon_hash,
            features.features_hash,
        )

    best, best_f1 = snapshot(), -1.0
    history: list[EpochRecord] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(docs))
        total, seen = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            x = features.build_batch([docs[i] for i in idx])
            value, grads = model.loss_and_grad(x, labels[idx], rng=rng)
            if cfg.optimizer == "adam":
                nn.adam_step(model.parameters(), grads, adam, lr=cfg.learning_rate)
            else:
                nn.sgd_step(model.parameters(), grads, cfg.learning_rate)
            total += value * len(idx)
            seen += len(idx)
        m = _metrics(_scores(model, features, val_docs, cfg.batch_size), val_labels)
        history.append(EpochRecord(epoch, total / seen, m.precision, m.recall, m.f1))
        if m.f1 >= best_f1:
            best, best_f1 = snapshot(), m.f1
    return best, history


def predict(
    ckpt: ModelCheckpoint, docs: Sequence[EncodedDocument], features: FeatureBuilder, batch_size: int = 64
) -> list[tuple[str, str, float]]:
    """(pmid, label, positive-class score); label is positive iff score >= 0.5."""
    if features.vocab_hash != ckpt.vocab_hash:
        raise CompatibilityError("vocabulary does not match the checkpoint")
    if features.lexicon_hash != ckpt.lexicon_hash:
        raise CompatibilityError("concept lexicon does not match the checkpoint")
    if ckpt.features_hash and features.features_hash != ckpt.features_hash:
        raise CompatibilityError("embedding tables do not match the checkpoint")
    scores = _scores(ckpt.model(), features, docs, batch_size)
    return [(d.pmid, "positive" if s >= 0.5 else "negative", float(s)) for d, s in zip(docs, scores)]
