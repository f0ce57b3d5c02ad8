"""Bag-of-words preparation: scrubbing, tokenization, lemmatization,
vocabulary pruning and vectorization."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

PLACEHOLDER = "⟨REDACT⟩"

_URL_RE = re.compile(r"https?://\S+")
# u/name and /u/name mentions; community names like r/something stay.
_USER_RE = re.compile(r"(?<![\w/])/?u/[A-Za-z0-9_-]+")


def scrub(text: str, placeholder: str = PLACEHOLDER) -> str:
    """Replace user mentions and http(s) URLs with a neutral placeholder."""
    text = _URL_RE.sub(placeholder, text)
    return _USER_RE.sub(placeholder, text)


# Runs of Unicode letters/digits; underscore is treated as a boundary.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercased tokens split on non-letter/digit boundaries.

    Pure-digit tokens and single-character tokens are dropped.
    """
    return [
        t for t in _TOKEN_RE.findall(text.lower())
        if len(t) > 1 and not t.isdigit()
    ]


def lemmatize(tokens: Sequence[str], lemma_table: Mapping[str, str]) -> list[str]:
    """Replace each token by its table entry when present."""
    return [lemma_table.get(t, t) for t in tokens]


def load_lemma_table(path: str | Path) -> dict[str, str]:
    """Two-column tab-separated file: surface<TAB>lemma."""
    table = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            surface, lemma = line.split("\t")
            table[surface] = lemma
    return table


def load_stopwords(path: str | Path) -> set[str]:
    """One term per line; blank lines and # comments ignored."""
    words = set()
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            term = line.strip()
            if term and not term.startswith("#"):
                words.add(term)
    return words


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    index: Mapping[str, int]
    doc_freq: Mapping[str, int]

    @property
    def size(self) -> int:
        return len(self.terms)

    def save(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for term in self.terms:
                fh.write(f"{term}\t{self.doc_freq[term]}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        terms: list[str] = []
        freq: dict[str, int] = {}
        with Path(path).open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                term, df = line.split("\t")
                terms.append(term)
                freq[term] = int(df)
        return cls(terms=tuple(terms), index={t: i for i, t in enumerate(terms)}, doc_freq=freq)


def build_vocabulary(
    docs: Iterable[Sequence[str]],
    stopwords: set[str] | frozenset[str] = frozenset(),
    min_df: int = 20,
) -> Vocabulary:
    """Vocabulary of non-stopword terms seen in at least ``min_df`` documents.

    Terms are ordered by descending document frequency, ties broken
    lexicographically, so the result is reproducible for a given corpus.
    """
    df: dict[str, int] = {}
    for doc in docs:
        for term in set(doc):
            df[term] = df.get(term, 0) + 1
    kept = [(t, n) for t, n in df.items() if n >= min_df and t not in stopwords]
    if not kept:
        raise ValueError("vocabulary is empty: check min_df, stopwords and corpus size")
    kept.sort(key=lambda item: (-item[1], item[0]))
    terms = tuple(t for t, _ in kept)
    return Vocabulary(
        terms=terms,
        index={t: i for i, t in enumerate(terms)},
        doc_freq={t: n for t, n in kept},
    )


@dataclass(frozen=True)
class DocBow:
    doc_id: str
    counts: Mapping[int, int]

    @property
    def is_empty(self) -> bool:
        return not self.counts

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def vectorize(doc: Sequence[str], vocab: Vocabulary, doc_id: str = "") -> DocBow:
    """Count in-vocabulary tokens; out-of-vocabulary tokens are ignored.

    The result may be empty; empty bags are flagged by ``is_empty`` and
    must be excluded from model training.
    """
    counts: dict[int, int] = {}
    index = vocab.index
    for tok in doc:
        m = index.get(tok)
        if m is not None:
            counts[m] = counts.get(m, 0) + 1
    return DocBow(doc_id=doc_id, counts=counts)
