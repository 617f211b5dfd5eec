"""Documents, tokenisation, vocabularies, dictionary concept linking and
fixed-length encoding."""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import re
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError

__all__ = [
    "Document",
    "Vocabulary",
    "ConceptLexicon",
    "EncodedDocument",
    "compose_text",
    "tokenize",
    "build_vocab",
    "link_concepts",
    "encode",
    "read_documents",
    "write_documents",
]

PAD_ID = 0
OOV_ID = 1
NO_CONCEPT = 0
LABELS = ("positive", "negative")
DEFAULT_LENGTH = 1000

# letters/digits/hyphens; underscores count as separators
_TOKEN_RE = re.compile(r"(?:[^\W_]|-)+")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class Document:
    pmid: str
    title: str = ""
    abstract: str = ""
    journal: str = ""
    pub_type: str = ""
    date: dt.date | None = None
    label: str | None = None

    def __post_init__(self):
        if not self.pmid:
            raise ValidationError("document pmid must be non-empty")
        if self.label is not None and self.label not in LABELS:
            raise ValidationError(f"document {self.pmid}: label must be one of {LABELS}, got {self.label!r}")
        if isinstance(self.date, str):
            object.__setattr__(self, "date", parse_date(self.date, self.pmid))

    @property
    def is_positive(self) -> bool:
        return self.label == "positive"

    def to_json(self) -> dict:
        d = asdict(self)
        d["date"] = self.date.isoformat() if self.date else None
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "Document":
        fields = ("pmid", "title", "abstract", "journal", "pub_type", "date", "label")
        unknown = set(obj) - set(fields)
        if unknown:
            raise ValidationError(f"unknown document fields {sorted(unknown)}")
        kw = {k: obj[k] for k in fields if k in obj and obj[k] is not None}
        if "pmid" not in kw:
            raise ValidationError("document without pmid")
        kw["pmid"] = str(kw["pmid"])
        return cls(**kw)


def parse_date(s: str, pmid: str = "?") -> dt.date:
    try:
        return dt.date.fromisoformat(s)
    except (TypeError, ValueError):
        raise ValidationError(f"document {pmid}: date {s!r} is not YYYY-MM-DD") from None


def read_documents(path: str | Path) -> list[Document]:
    """Load a JSON Lines document file; pmids must be unique."""
    docs, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = Document.from_json(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: {exc.msg}") from None
            except ValidationError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if doc.pmid in seen:
                raise ParseError(f"{path}:{lineno}: duplicate pmid {doc.pmid}")
            seen.add(doc.pmid)
            docs.append(doc)
    return docs


def write_documents(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in docs:
            fh.write(json.dumps(d.to_json(), ensure_ascii=False) + "\n")


def compose_text(d: Document) -> str:
    """title, abstract, pmid, journal, publication type joined by single spaces."""
    joined = " ".join((d.title, d.abstract, d.pmid, d.journal, d.pub_type))
    return _WS_RE.sub(" ", joined).strip()


def tokenize(s: str) -> list[str]:
    """Lower-cased runs of letters, digits and inner hyphens.

    >>> tokenize("GWAS-based study, 2019.")
    ['gwas-based', 'study', '2019']
    """
    out = []
    for tok in _TOKEN_RE.findall(s.lower()):
        tok = tok.strip("-")
        if tok:
            out.append(tok)
    return out


def document_tokens(d: Document) -> list[str]:
    return tokenize(compose_text(d))


class Vocabulary:
    """Token ids with 0 reserved for padding and 1 for out-of-vocabulary."""

    def __init__(self, tokens: Sequence[str] = ()):
        self.tokens: list[str] = ["<pad>", "<oov>"]
        self._ids: dict[str, int] = {}
        for t in tokens:
            if t in self._ids:
                raise ValidationError(f"duplicate vocabulary token {t!r}")
            self._ids[t] = len(self.tokens)
            self.tokens.append(t)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self._ids

    def __getitem__(self, token: str) -> int:
        return self._ids.get(token, OOV_ID)

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self._ids.get(t, OOV_ID) for t in tokens]

    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.tokens[2:]).encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for t in self.tokens[2:]:
                fh.write(t + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            return cls([line.rstrip("\r\n") for line in fh if line.strip()])


def build_vocab(docs: Iterable[Document], min_count: int = 1) -> Vocabulary:
    """Tokens seen at least ``min_count`` times, most frequent first (ties by string)."""
    if min_count < 1:
        raise ValidationError("min_count must be >= 1")
    counts = Counter(t for d in docs for t in document_tokens(d))
    kept = [t for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(kept)


class ConceptLexicon:
    """Phrase -> concept dictionary for greedy longest-match linking.

    Concept keys (e.g. graph concept ids) are numbered 1..K in sorted key
    order so that integer ids do not depend on insertion order; 0 means
    "no concept".
    """

    def __init__(self, entries: Iterable[tuple[str, str]] = ()):
        phrases: dict[tuple[str, ...], str] = {}
        for phrase, key in entries:
            toks = tuple(tokenize(phrase))
            if not toks:
                raise ValidationError(f"lexicon phrase {phrase!r} is empty after tokenisation")
            prev = phrases.get(toks)
            if prev is not None and prev != key:
                raise ValidationError(f"lexicon phrase {phrase!r} maps to both {prev!r} and {key!r}")
            phrases[toks] = key
        self.concept_keys: list[str] = sorted(set(phrases.values()))
        key_id = {k: i + 1 for i, k in enumerate(self.concept_keys)}
        self._phrases = {p: key_id[k] for p, k in phrases.items()}
        self.max_len = max((len(p) for p in self._phrases), default=0)

    def __len__(self) -> int:
        return len(self._phrases)

    def concept_id(self, key: str) -> int:
        return self.concept_keys.index(key) + 1

    def concept_key(self, cid: int) -> str | None:
        return self.concept_keys[cid - 1] if cid > 0 else None

    def match(self, tokens: Sequence[str], start: int) -> tuple[int, int]:
        """(length, concept id) of the longest phrase at ``start``; (0, 0) if none."""
        for size in range(min(self.max_len, len(tokens) - start), 0, -1):
            cid = self._phrases.get(tuple(tokens[start : start + size]))
            if cid is not None:
                return size, cid
        return 0, NO_CONCEPT

    def fingerprint(self) -> str:
        lines = sorted(" ".join(p) + "\t" + self.concept_keys[c - 1] for p, c in self._phrases.items())
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()

    @classmethod
    def load(cls, path: str | Path) -> "ConceptLexicon":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\r\n")
                if not line.strip():
                    continue
                cols = line.split("\t")
                if len(cols) != 2 or not cols[1]:
                    raise ParseError(f"{path}:{lineno}: expected 'phrase<TAB>concept_id'")
                entries.append((cols[0], cols[1]))
        try:
            return cls(entries)
        except ValidationError as exc:
            raise ParseError(f"{path}: {exc}") from None


def link_concepts(tokens: Sequence[str], lex: ConceptLexicon) -> list[int]:
    out = [NO_CONCEPT] * len(tokens)
    i = 0
    while i < len(tokens):
        size, cid = lex.match(tokens, i)
        if size:
            out[i : i + size] = [cid] * size
            i += size
        else:
            i += 1
    return out


@dataclass(frozen=True)
class EncodedDocument:
    token_ids: np.ndarray
    concept_ids: np.ndarray
    pmid: str = ""

    def __post_init__(self):
        if self.token_ids.shape != self.concept_ids.shape or self.token_ids.ndim != 1:
            raise ValidationError("token and concept id sequences must be 1-D and equally long")

    @property
    def length(self) -> int:
        return len(self.token_ids)


def encode(d: Document, v: Vocabulary, lex: ConceptLexicon, n: int = DEFAULT_LENGTH) -> EncodedDocument:
    if n < 1:
        raise ValidationError("sequence length must be >= 1")
    toks = document_tokens(d)
    concepts = link_concepts(toks, lex)[:n]
    ids = v.ids(toks[:n])
    token_ids = np.zeros(n, dtype=np.int64)
    concept_ids = np.zeros(n, dtype=np.int64)
    token_ids[: len(ids)] = ids
    concept_ids[: len(concepts)] = concepts
    return EncodedDocument(token_ids, concept_ids, d.pmid)
