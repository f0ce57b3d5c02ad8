"""Co-occurrence, coherence, clustering-agreement and distributional
statistics over topics and topic pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from .topic_naming import TopicPair


@dataclass(frozen=True)
class PairStats:
    """Top-1 marginals and unordered top-2 pair counts over a document set."""

    topics: tuple[str, ...]
    counts: Mapping[TopicPair, int]
    marginals: Mapping[str, int]
    total: int

    @classmethod
    def from_assignments(
        cls,
        assignments: Sequence[tuple[str, str]],
        topics: Sequence[str],
    ) -> "PairStats":
        """Count from per-document (top-1, top-2) name pairs."""
        topic_set = set(topics)
        counts: dict[TopicPair, int] = {}
        marginals = {t: 0 for t in topics}
        for top1, top2 in assignments:
            if top1 not in topic_set or top2 not in topic_set:
                raise ValueError(f"assignment ({top1!r}, {top2!r}) outside topic set")
            marginals[top1] += 1
            pair = TopicPair(top1, top2)
            counts[pair] = counts.get(pair, 0) + 1
        return cls(topics=tuple(topics), counts=counts, marginals=marginals, total=len(assignments))


@dataclass(frozen=True)
class PmiMatrix:
    topics: tuple[str, ...]
    values: np.ndarray  # symmetric; NaN marks UNDEFINED cells

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.topics)]
        for i, name in enumerate(self.topics):
            cells = [
                "" if math.isnan(v) else f"{v:.6f}"
                for v in self.values[i]
            ]
            lines.append(name + "," + ",".join(cells))
        return "\n".join(lines) + "\n"


def pmi_matrix(stats: PairStats) -> PmiMatrix:
    """log2 p(k,k') / (p(k) p(k')) with top-1 marginals.

    Zero-count pairs, zero-marginal topics and the diagonal are NaN
    (rendered as blank cells downstream) rather than -inf.
    """
    if stats.total <= 0:
        raise ValueError("PairStats.total must be positive")
    T = len(stats.topics)
    values = np.full((T, T), np.nan)
    index = {t: i for i, t in enumerate(stats.topics)}
    p_marginal = np.array([stats.marginals.get(t, 0) / stats.total for t in stats.topics])
    for pair, count in stats.counts.items():
        if count <= 0:
            continue
        i, j = index[pair.a], index[pair.b]
        if p_marginal[i] == 0 or p_marginal[j] == 0:
            continue
        p_joint = count / stats.total
        v = math.log2(p_joint / (p_marginal[i] * p_marginal[j]))
        values[i, j] = v
        values[j, i] = v
    # zero-marginal topics are undefined across their whole row/column
    for i in np.flatnonzero(p_marginal == 0):
        values[i, :] = np.nan
        values[:, i] = np.nan
    np.fill_diagonal(values, np.nan)
    return PmiMatrix(topics=stats.topics, values=values)


@dataclass(frozen=True)
class CoherenceCounts:
    """Document frequencies D1(term) and co-document frequencies D2({x, y})."""

    d1: Mapping[str, int]
    d2: Mapping[tuple[str, str], int]

    def pair(self, x: str, y: str) -> int:
        key = (x, y) if x <= y else (y, x)
        return self.d2.get(key, 0)


def coherence_counts(docs: Iterable[Iterable[str]], terms: Sequence[str]) -> CoherenceCounts:
    """Count D1/D2 for ``terms`` over the given document set."""
    wanted = set(terms)
    d1 = {t: 0 for t in terms}
    d2: dict[tuple[str, str], int] = {}
    for doc in docs:
        present = sorted(wanted.intersection(doc))
        for t in present:
            d1[t] += 1
        for i in range(len(present)):
            for j in range(i + 1, len(present)):
                key = (present[i], present[j])
                d2[key] = d2.get(key, 0) + 1
    return CoherenceCounts(d1=d1, d2=d2)


def umass_coherence(top_terms: Sequence[str], counts: CoherenceCounts) -> float:
    """Smoothed log co-document frequency, averaged over keyword pairs.

    C = sum_{m=2..N} sum_{l<m} ln((D2(x_m, x_l) + 1) / D1(x_m)), divided by
    N(N-1)/2 so lists of different lengths stay comparable.
    """
    N = len(top_terms)
    if N < 2:
        raise ValueError("need at least two terms")
    for t in top_terms:
        if counts.d1.get(t, 0) <= 0:
            raise ValueError(f"term {t!r} has zero document frequency")
    total = 0.0
    for m in range(1, N):
        xm = top_terms[m]
        for l in range(m):
            total += math.log((counts.pair(xm, top_terms[l]) + 1) / counts.d1[xm])
    return total / (N * (N - 1) / 2)


def _contingency(labels_a: Sequence, labels_b: Sequence) -> np.ndarray:
    ua = {v: i for i, v in enumerate(dict.fromkeys(labels_a))}
    ub = {v: i for i, v in enumerate(dict.fromkeys(labels_b))}
    table = np.zeros((len(ua), len(ub)), dtype=np.int64)
    for x, y in zip(labels_a, labels_b):
        table[ua[x], ub[y]] += 1
    return table


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def _expected_mi(a: np.ndarray, b: np.ndarray, n: int) -> float:
    """Expected mutual information under the permutation (hypergeometric) model."""
    emi = 0.0
    log_n = math.log(n)
    lg_n = gammaln(n + 1)
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            log_prob = (
                gammaln(ai + 1) + gammaln(bj + 1)
                + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                - lg_n - gammaln(nij + 1)
                - gammaln(ai - nij + 1) - gammaln(bj - nij + 1)
                - gammaln(n - ai - bj + nij + 1)
            )
            terms = (nij / n) * (np.log(nij) + log_n - math.log(ai) - math.log(bj))
            emi += float((terms * np.exp(log_prob)).sum())
    return emi


def ami(labels_a: Sequence, labels_b: Sequence) -> float:
    """Adjusted mutual information with averaged normalization, in nats."""
    if len(labels_a) != len(labels_b):
        raise ValueError("labelings must have equal length")
    n = len(labels_a)
    if n < 1:
        raise ValueError("labelings must be non-empty")
    table = _contingency(labels_a, labels_b)
    a = table.sum(axis=1)
    b = table.sum(axis=0)

    h_u = _entropy(a, n)
    h_v = _entropy(b, n)
    if h_u == 0.0 and h_v == 0.0:
        return 1.0

    mi = 0.0
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            nij = table[i, j]
            if nij > 0:
                mi += (nij / n) * math.log(n * nij / (a[i] * b[j]))

    emi = _expected_mi(a, b, n)
    denom = 0.5 * (h_u + h_v) - emi
    if denom == 0.0:
        return 1.0 if mi == emi else 0.0
    return (mi - emi) / denom


@dataclass(frozen=True)
class PrevalenceShare:
    top1_pct: float
    top1_or_2_pct: float


def prevalence(top_assignments: Sequence[tuple[str, str]]) -> dict[str, PrevalenceShare]:
    """Per topic: % of documents where it is top-1, and where it is top-1 or top-2."""
    if not top_assignments:
        raise ValueError("no assignments")
    n = len(top_assignments)
    top1: dict[str, int] = {}
    either: dict[str, int] = {}
    for a, b in top_assignments:
        top1[a] = top1.get(a, 0) + 1
        for t in {a, b}:
            either[t] = either.get(t, 0) + 1
    return {
        t: PrevalenceShare(
            top1_pct=100.0 * top1.get(t, 0) / n,
            top1_or_2_pct=100.0 * either.get(t, 0) / n,
        )
        for t in either
    }


@dataclass(frozen=True)
class PairSizeCcdf:
    points: tuple[tuple[int, float], ...]  # (size, fraction of pairs with count >= size)
    share_empty: float
    share_ge_50: float
    share_ge_100: float

    def to_csv(self) -> str:
        lines = ["size,ccdf"]
        lines += [f"{s},{f:.6f}" for s, f in self.points]
        return "\n".join(lines) + "\n"


def pair_size_ccdf(stats: PairStats) -> PairSizeCcdf:
    """CCDF over the sizes of all possible topic pairs (zero counts included)."""
    sizes = []
    topics = stats.topics
    for i in range(len(topics)):
        for j in range(i + 1, len(topics)):
            sizes.append(stats.counts.get(TopicPair(topics[i], topics[j]), 0))
    sizes_arr = np.asarray(sizes, dtype=np.int64)
    n_pairs = sizes_arr.size
    if n_pairs == 0:
        return PairSizeCcdf(points=(), share_empty=0.0, share_ge_50=0.0, share_ge_100=0.0)
    points = tuple(
        (int(s), float((sizes_arr >= s).sum() / n_pairs))
        for s in sorted(set(sizes_arr.tolist()))
    )
    return PairSizeCcdf(
        points=points,
        share_empty=float((sizes_arr == 0).sum() / n_pairs),
        share_ge_50=float((sizes_arr >= 50).sum() / n_pairs),
        share_ge_100=float((sizes_arr >= 100).sum() / n_pairs),
    )
