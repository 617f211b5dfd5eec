"""Train/validation/test construction: synchronous and date-cutoff splits,
random and ambiguous negative sampling, and keyword extraction."""

from __future__ import annotations

import datetime as dt
import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .text import Document, document_tokens, tokenize

__all__ = [
    "SplitManifest",
    "NegativeSampleSpec",
    "synchronous_split",
    "asynchronous_split",
    "keyword_top_k",
    "negative_sample_random",
    "negative_sample_ambiguous",
    "write_manifest",
    "read_manifest",
    "load_phrases",
    "stopwords",
]

DEFAULT_CUTOFF = dt.date(2018, 1, 1)
DEFAULT_KEYWORDS = 18
SPLITS = ("train", "validation", "test")
STRATEGIES = ("synchronous", "asynchronous")


@dataclass
class SplitManifest:
    train: list[str] = field(default_factory=list)
    validation: list[str] = field(default_factory=list)
    test: list[str] = field(default_factory=list)
    cutoff_date: dt.date | None = None
    seed: int = 0
    strategy: str = "synchronous"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"unknown split strategy {self.strategy!r}")
        seen: dict[str, str] = {}
        for name in SPLITS:
            for pmid in getattr(self, name):
                if pmid in seen:
                    raise ValidationError(f"pmid {pmid} appears in both {seen[pmid]} and {name}")
                seen[pmid] = name

    def split_of(self) -> dict[str, str]:
        return {p: name for name in SPLITS for p in getattr(self, name)}

    def select(self, docs: Iterable[Document], split: str) -> list[Document]:
        """Documents of ``split`` in manifest order."""
        by_pmid = {d.pmid: d for d in docs}
        missing = [p for p in getattr(self, split) if p not in by_pmid]
        if missing:
            raise ValidationError(f"{len(missing)} {split} pmids not found, e.g. {missing[:5]}")
        return [by_pmid[p] for p in getattr(self, split)]

    def check_temporal(self, docs: Iterable[Document]) -> None:
        if self.strategy != "asynchronous" or self.cutoff_date is None:
            return
        dates = {d.pmid: d.date for d in docs}
        for name in ("train", "validation"):
            for p in getattr(self, name):
                if p in dates and dates[p] is not None and dates[p] >= self.cutoff_date:
                    raise ValidationError(f"{name} pmid {p} dated {dates[p]} is not before {self.cutoff_date}")
        for p in self.test:
            if p in dates and dates[p] is not None and dates[p] < self.cutoff_date:
                raise ValidationError(f"test pmid {p} dated {dates[p]} is before {self.cutoff_date}")


def _partition_sizes(total: int, ratios: Sequence[float]) -> list[int]:
    # largest remainder, so sizes always add up to total
    raw = [r * total for r in ratios]
    sizes = [math.floor(x + 1e-9) for x in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[: total - sum(sizes)]:
        sizes[i] += 1
    return sizes


def synchronous_split(docs: Sequence[Document], ratios=(0.8, 0.1, 0.1), seed: int = 0) -> SplitManifest:
    """Stratified shuffle followed by a contiguous train/validation/test cut.

    Each label group is shuffled on its own and the groups are interleaved
    by fractional rank, so every contiguous block keeps the label mix.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    if len(docs) < 3:
        raise ValidationError(f"need at least 3 documents to split, got {len(docs)}")
    _check_unique(docs)
    rng = np.random.default_rng(seed)
    groups: dict[str | None, list[Document]] = {}
    for d in docs:
        groups.setdefault(d.label, []).append(d)
    keyed = []
    for label in sorted(groups, key=lambda x: (x is None, x or "")):
        members = groups[label]
        perm = rng.permutation(len(members))
        jitter = rng.random(len(members))
        for rank, j in enumerate(perm):
            keyed.append(((rank + 0.5) / len(members), jitter[rank], members[j].pmid))
    keyed.sort()
    order = [k[2] for k in keyed]
    n_train, n_val, _ = _partition_sizes(len(order), ratios)
    return SplitManifest(
        train=order[:n_train],
        validation=order[n_train : n_train + n_val],
        test=order[n_train + n_val :],
        seed=seed,
        strategy="synchronous",
    )


def asynchronous_split(
    docs: Sequence[Document], cutoff: dt.date = DEFAULT_CUTOFF, val_fraction: float = 0.1, seed: int = 0
) -> SplitManifest:
    """Documents dated strictly before ``cutoff`` go to train/validation, the rest to test."""
    if isinstance(cutoff, str):
        cutoff = dt.date.fromisoformat(cutoff)
    if not 0 <= val_fraction < 1:
        raise ValidationError("val_fraction must lie in [0, 1)")
    _check_unique(docs)
    old, new = [], []
    for d in docs:
        if d.date is None:
            raise ValidationError(f"document {d.pmid} has no date")
        (old if d.date < cutoff else new).append(d.pmid)
    if not new:
        warnings.warn(f"no documents dated on or after {cutoff}; test set is empty", stacklevel=2)
    rng = np.random.default_rng(seed)
    n_val = round(val_fraction * len(old))
    val_idx = set(rng.choice(len(old), size=n_val, replace=False).tolist()) if n_val else set()
    return SplitManifest(
        train=[p for i, p in enumerate(old) if i not in val_idx],
        validation=[p for i, p in enumerate(old) if i in val_idx],
        test=new,
        cutoff_date=cutoff,
        seed=seed,
        strategy="asynchronous",
    )


def _check_unique(docs):
    c = Counter(d.pmid for d in docs)
    dup = [p for p, n in c.items() if n > 1]
    if dup:
        raise ValidationError(f"duplicate pmids {sorted(dup)[:5]}")


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    text = resources.files("litriage").joinpath("data/stopwords_en.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def _is_number(tok: str) -> bool:
    return all(ch.isdigit() or ch == "-" for ch in tok)


def keyword_top_k(positives: Iterable[Document], k: int = DEFAULT_KEYWORDS, by: str = "document") -> list[str]:
    """Most frequent non-stopword, non-numeric tokens across ``positives``.

    ``by="document"`` counts each token once per document; ``by="term"``
    counts raw occurrences. Ties break lexicographically.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if by not in ("document", "term"):
        raise ValidationError(f"unknown frequency mode {by!r}")
    stop = stopwords()
    counts: Counter[str] = Counter()
    for d in positives:
        toks = [t for t in document_tokens(d) if t not in stop and not _is_number(t)]
        counts.update(set(toks) if by == "document" else toks)
    ranked = sorted(counts, key=lambda t: (-counts[t], t))
    if len(ranked) < k:
        warnings.warn(f"only {len(ranked)} keyword candidates available, {k} requested", stacklevel=2)
    return ranked[:k]


def _as_negative(d: Document) -> Document:
    return replace(d, label="negative")


def negative_sample_random(
    pool: Sequence[Document], count: int, positives: Iterable[Document], seed: int = 0
) -> list[Document]:
    """Uniform draw without replacement from ``pool`` minus positive pmids."""
    taken = {d.pmid for d in positives}
    eligible = _dedup([d for d in pool if d.pmid not in taken])
    if count > len(eligible):
        raise ValidationError(f"pool has {len(eligible)} eligible documents, {count} requested")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(len(eligible), size=count, replace=False))
    return [_as_negative(eligible[i]) for i in chosen]


def _dedup(docs):
    seen, out = set(), []
    for d in docs:
        if d.pmid not in seen:
            seen.add(d.pmid)
            out.append(d)
    return out


@dataclass
class NegativeSampleSpec:
    strategy: str
    pool: Sequence[Document]
    count: int
    gene_lexicon: Sequence[str] = ()
    disease_lexicon: Sequence[str] = ()
    keyword_count: int = DEFAULT_KEYWORDS
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in ("random", "ambiguous"):
            raise ValidationError(f"unknown negative sampling strategy {self.strategy!r}")
        if self.count < 0:
            raise ValidationError("count must be >= 0")


class _PhraseMatcher:
    def __init__(self, phrases: Iterable[str]):
        self.phrases = {tuple(tokenize(p)) for p in phrases} - {()}
        self.lengths = sorted({len(p) for p in self.phrases})

    def __bool__(self):
        return bool(self.phrases)

    def found_in(self, toks: Sequence[str]) -> bool:
        for size in self.lengths:
            for i in range(len(toks) - size + 1):
                if tuple(toks[i : i + size]) in self.phrases:
                    return True
        return False


def ambiguous_candidates(
    pool: Sequence[Document], gene_lexicon, disease_lexicon, keywords: Iterable[str]
) -> list[Document]:
    """Pool documents mentioning a gene and a disease, or any keyword."""
    genes, diseases = _PhraseMatcher(gene_lexicon), _PhraseMatcher(disease_lexicon)
    if not genes or not diseases:
        raise ValidationError("gene and disease lexicons must be non-empty")
    kw = set(keywords)
    out = []
    for d in pool:
        toks = document_tokens(d)
        if (genes.found_in(toks) and diseases.found_in(toks)) or kw.intersection(toks):
            out.append(d)
    return out


def negative_sample_ambiguous(spec: NegativeSampleSpec, positives: Sequence[Document]) -> list[Document]:
    """Hard negatives: mention-filtered plus keyword-matched pool documents,
    minus positive pmids, down-sampled to ``spec.count``."""
    positives = list(positives)
    keywords = keyword_top_k(positives, spec.keyword_count) if positives else []
    cands = ambiguous_candidates(spec.pool, spec.gene_lexicon, spec.disease_lexicon, keywords)
    taken = {d.pmid for d in positives}
    cands = _dedup([d for d in cands if d.pmid not in taken])
    if len(cands) <= spec.count:
        if len(cands) < spec.count:
            warnings.warn(f"only {len(cands)} ambiguous candidates for {spec.count} requested negatives", stacklevel=2)
        return [_as_negative(d) for d in cands]
    rng = np.random.default_rng(spec.seed)
    chosen = np.sort(rng.choice(len(cands), size=spec.count, replace=False))
    return [_as_negative(cands[i]) for i in chosen]


def load_phrases(path: str | Path) -> list[str]:
    """First column of a phrase-per-line file (extra TSV columns ignored)."""
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\r\n").split("\t")[0] for line in fh if line.strip() and not line.startswith("#")]


# -- manifest I/O --------------------------------------------------------------


def write_manifest(m: SplitManifest, path: str | Path) -> None:
    """Header record followed by one ``{"pmid", "split"}`` record per document."""
    header = {
        "strategy": m.strategy,
        "seed": m.seed,
        "cutoff_date": m.cutoff_date.isoformat() if m.cutoff_date else None,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for name in SPLITS:
            for pmid in getattr(m, name):
                fh.write(json.dumps({"pmid": pmid, "split": name}, sort_keys=True) + "\n")


def read_manifest(path: str | Path) -> SplitManifest:
    with open(path, encoding="utf-8") as fh:
        lines = [(i, line) for i, line in enumerate(fh, 1) if line.strip()]
    if not lines:
        raise ParseError(f"{path}: empty manifest (missing header)")
    try:
        header = json.loads(lines[0][1])
        strategy, seed, cutoff = header["strategy"], header["seed"], header["cutoff_date"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}:1: malformed manifest header ({exc})") from None
    parts: dict[str, list[str]] = {s: [] for s in SPLITS}
    for lineno, line in lines[1:]:
        try:
            rec = json.loads(line)
            pmid, split = str(rec["pmid"]), rec["split"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}:{lineno}: malformed manifest record ({exc})") from None
        if split not in parts:
            raise ParseError(f"{path}:{lineno}: unknown split {split!r}")
        parts[split].append(pmid)
    try:
        return SplitManifest(
            **parts,
            cutoff_date=dt.date.fromisoformat(cutoff) if cutoff else None,
            seed=int(seed),
            strategy=strategy,
        )
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
