"""Word-list lexicon scoring: per-category token fractions, binary moral
foundation presence, valence-split prevalence, coverage gaps and Pearson
correlation against at-fault judgments."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .corpus import Valence

FOUNDATIONS = ("care", "fairness", "loyalty", "authority", "sanctity")


class MatchMode(str, Enum):
    EXACT = "EXACT"
    PREFIX_WILDCARD = "PREFIX_WILDCARD"


@dataclass(frozen=True)
class Category:
    name: str
    exact: frozenset[str]
    prefixes: tuple[str, ...]  # sorted, without the trailing '*'

    def matches(self, token: str) -> bool:
        if token in self.exact:
            return True
        return any(token.startswith(p) for p in self.prefixes)


@dataclass(frozen=True)
class Lexicon:
    name: str
    categories: tuple[Category, ...]
    match_mode: MatchMode

    @property
    def category_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.categories)


def _build_category(name: str, words: Sequence[str], mode: MatchMode) -> Category:
    unique = sorted(set(words))
    if not unique:
        raise ValueError(f"category {name!r} has no words")
    if mode == MatchMode.PREFIX_WILDCARD:
        prefixes = tuple(sorted(w[:-1] for w in unique if w.endswith("*") and len(w) > 1))
        exact = frozenset(w for w in unique if not w.endswith("*"))
    else:
        prefixes = ()
        exact = frozenset(unique)
    return Category(name=name, exact=exact, prefixes=prefixes)


def load_lexicon(path: str | Path, match_mode: MatchMode | str | None = None) -> Lexicon:
    """Parse a lexicon file.

    Format: a ``#lexicon <name> <mode>`` header, then one
    ``category<TAB>word word ...`` line per category. An explicit
    ``match_mode`` argument overrides the header's mode.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#lexicon"):
        raise ValueError(f"{path}: missing '#lexicon <name> <mode>' header")
    header = lines[0].split()
    if len(header) != 3:
        raise ValueError(f"{path}: malformed lexicon header")
    name, header_mode = header[1], header[2]
    try:
        mode = MatchMode(str(match_mode.value if isinstance(match_mode, MatchMode) else match_mode or header_mode).upper())
    except ValueError:
        raise ValueError(f"unknown match mode {match_mode or header_mode!r}") from None

    seen: dict[str, list[str]] = {}
    order: list[str] = []
    for line in lines[1:]:
        if not line.strip() or line.startswith("#"):
            continue
        category, _, words = line.partition("\t")
        if category not in seen:
            seen[category] = []
            order.append(category)
        seen[category].extend(words.split())
    if not order:
        raise ValueError(f"{path}: lexicon has no categories")
    categories = tuple(_build_category(c, seen[c], mode) for c in order)
    return Lexicon(name=name, categories=categories, match_mode=mode)


def category_fractions(tokens: Sequence[str], lexicon: Lexicon) -> np.ndarray:
    """Fraction of tokens matching each category, in category order.

    A token belonging to several categories counts toward each of them.
    Zero-length documents yield the all-zero vector; callers flag those.
    """
    out = np.zeros(len(lexicon.categories))
    if not tokens:
        return out
    counts = Counter(tokens)  # match each distinct token once
    for i, cat in enumerate(lexicon.categories):
        matched = sum(n for t, n in counts.items() if cat.matches(t))
        out[i] = matched / len(tokens)
    return out


@dataclass(frozen=True)
class FoundationVector:
    care: int
    fairness: int
    loyalty: int
    authority: int
    sanctity: int

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.care, self.fairness, self.loyalty, self.authority, self.sanctity)

    @property
    def all_zero(self) -> bool:
        return not any(self.as_tuple())


def foundation_presence(tokens: Sequence[str], mfd: Lexicon) -> FoundationVector:
    """Binary flag per foundation: does any token match the category?"""
    names = set(mfd.category_names)
    if names != set(FOUNDATIONS):
        raise ValueError(
            f"foundation lexicon must have exactly the categories {FOUNDATIONS}, got {sorted(names)}"
        )
    by_name = {c.name: c for c in mfd.categories}
    distinct = set(tokens)
    flags = {
        f: int(any(by_name[f].matches(t) for t in distinct))
        for f in FOUNDATIONS
    }
    return FoundationVector(**flags)


@dataclass(frozen=True)
class FoundationPrevalence:
    """Per-valence mean presence of each foundation; None when a valence is absent."""

    ya: np.ndarray | None
    na: np.ndarray | None
    n_ya: int
    n_na: int


def foundation_prevalence(
    group: Sequence[tuple[FoundationVector, Valence]],
) -> FoundationPrevalence:
    """Mean foundation flags split by valence; NONE items are excluded."""
    if not group:
        raise ValueError("empty group")
    ya = [np.asarray(v.as_tuple(), dtype=np.float64) for v, val in group if val == Valence.YA]
    na = [np.asarray(v.as_tuple(), dtype=np.float64) for v, val in group if val == Valence.NA]
    return FoundationPrevalence(
        ya=np.mean(ya, axis=0) if ya else None,
        na=np.mean(na, axis=0) if na else None,
        n_ya=len(ya),
        n_na=len(na),
    )


def coverage_missing_rate(
    vectors: Sequence[FoundationVector],
    topics: Sequence[str] | None = None,
) -> tuple[float, dict[str, float] | None]:
    """Share of items with no detected foundation, optionally per topic."""
    if not vectors:
        raise ValueError("no vectors")
    overall = sum(1 for v in vectors if v.all_zero) / len(vectors)
    if topics is None:
        return overall, None
    if len(topics) != len(vectors):
        raise ValueError("topics must align with vectors")
    missing: dict[str, int] = {}
    totals: dict[str, int] = {}
    for v, t in zip(vectors, topics):
        totals[t] = totals.get(t, 0) + 1
        if v.all_zero:
            missing[t] = missing.get(t, 0) + 1
    per_topic = {t: missing.get(t, 0) / totals[t] for t in totals}
    return overall, per_topic


@dataclass(frozen=True)
class CategoryCorrelation:
    category: str
    r: float
    p: float
    significant: bool
    defined: bool


def correlate_ya(
    features: np.ndarray,
    ya_flags: Sequence[int],
    category_names: Sequence[str],
    alpha: float = 0.05,
) -> list[CategoryCorrelation]:
    """Pearson r between each feature column and the binary at-fault flags.

    Two-sided p-values come from the t distribution with n-2 degrees of
    freedom; ``significant`` is p <= alpha. A zero-variance feature column
    is flagged undefined instead of producing a spurious value.
    """
    features = np.asarray(features, dtype=np.float64)
    y = np.asarray(ya_flags, dtype=np.float64)
    n = y.shape[0]
    if features.shape != (n, len(category_names)):
        raise ValueError("features must be (n_docs, n_categories)")
    if n < 3:
        raise ValueError("need at least 3 documents")
    y_centered = y - y.mean()
    y_ss = float(y_centered @ y_centered)
    if y_ss == 0.0:
        raise ValueError("ya_flags are constant; correlation undefined for the group")

    out = []
    dof = n - 2
    for j, name in enumerate(category_names):
        x = features[:, j]
        x_centered = x - x.mean()
        x_ss = float(x_centered @ x_centered)
        if x_ss == 0.0:
            out.append(CategoryCorrelation(name, math.nan, math.nan, False, False))
            continue
        r = float(x_centered @ y_centered) / math.sqrt(x_ss * y_ss)
        r = max(-1.0, min(1.0, r))
        if abs(r) == 1.0:
            p = 0.0
        else:
            t = r * math.sqrt(dof / (1.0 - r * r))
            p = 2.0 * float(sps.t.sf(abs(t), dof))
        out.append(CategoryCorrelation(name, r, p, p <= alpha, True))
    return out


def top_variance_categories(
    features: np.ndarray,
    category_names: Sequence[str],
    n: int = 50,
) -> list[str]:
    """Category names ordered by descending feature variance, top ``n``."""
    features = np.asarray(features, dtype=np.float64)
    variances = features.var(axis=0)
    order = np.argsort(-variances, kind="stable")[:n]
    return [category_names[i] for i in order]
