"""Latent topic model over bag-of-words documents.

Training runs collapsed Gibbs sampling with an internal splitmix64
generator, so a (corpus, hyperparameters, seed) triple always yields a
bit-identical model. Held-out quality is scored by document-completion
perplexity: per-document mixtures are folded in on half of each
document's tokens and the log-likelihood is evaluated on the other half.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .seeds import derive_seed
from .textprep import DocBow

_U64_MASK = (1 << 64) - 1


@njit(cache=True, inline="always")
def _next_u64(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _next_unit(state):
    # 53-bit mantissa draw in [0, 1)
    return float(_next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _gibbs_train(doc_ids, word_ids, n_docs, K, M, alpha, beta, iterations, seed):
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    n_tokens = word_ids.shape[0]
    z = np.empty(n_tokens, dtype=np.int32)
    n_kw = np.zeros((K, M), dtype=np.int64)
    n_k = np.zeros(K, dtype=np.int64)
    n_dk = np.zeros((n_docs, K), dtype=np.int64)

    for i in range(n_tokens):
        k = int(_next_u64(state) % np.uint64(K))
        z[i] = k
        n_kw[k, word_ids[i]] += 1
        n_k[k] += 1
        n_dk[doc_ids[i], k] += 1

    probs = np.empty(K, dtype=np.float64)
    mbeta = M * beta
    for _ in range(iterations):
        for i in range(n_tokens):
            w = word_ids[i]
            d = doc_ids[i]
            k = z[i]
            n_kw[k, w] -= 1
            n_k[k] -= 1
            n_dk[d, k] -= 1

            total = 0.0
            for kk in range(K):
                p = (n_kw[kk, w] + beta) / (n_k[kk] + mbeta) * (n_dk[d, kk] + alpha)
                probs[kk] = p
                total += p
            r = _next_unit(state) * total
            acc = 0.0
            knew = K - 1
            for kk in range(K):
                acc += probs[kk]
                if r < acc:
                    knew = kk
                    break

            z[i] = knew
            n_kw[knew, w] += 1
            n_k[knew] += 1
            n_dk[d, knew] += 1
    return n_kw, n_dk


@njit(cache=True)
def _gibbs_foldin(word_ids, phi, alpha, sweeps, seed):
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    K = phi.shape[0]
    n = word_ids.shape[0]
    z = np.empty(n, dtype=np.int32)
    n_k = np.zeros(K, dtype=np.int64)

    for i in range(n):
        k = int(_next_u64(state) % np.uint64(K))
        z[i] = k
        n_k[k] += 1

    probs = np.empty(K, dtype=np.float64)
    for _ in range(sweeps):
        for i in range(n):
            w = word_ids[i]
            k = z[i]
            n_k[k] -= 1
            total = 0.0
            for kk in range(K):
                p = phi[kk, w] * (n_k[kk] + alpha)
                probs[kk] = p
                total += p
            r = _next_unit(state) * total
            acc = 0.0
            knew = K - 1
            for kk in range(K):
                acc += probs[kk]
                if r < acc:
                    knew = kk
                    break
            z[i] = knew
            n_k[knew] += 1

    theta = np.empty(K, dtype=np.float64)
    denom = n + K * alpha
    for kk in range(K):
        theta[kk] = (n_k[kk] + alpha) / denom
    return theta


@dataclass(frozen=True)
class TopicModel:
    K: int
    M: int
    phi: np.ndarray          # K x M, rows sum to 1
    theta_train: np.ndarray  # n_docs x K, rows sum to 1
    alpha: float
    beta: float
    seed: int
    iterations: int
    vocab_hash: str = ""
    terms: tuple[str, ...] | None = None

    def validate(self, tol: float = 1e-9) -> None:
        if self.K < 2:
            raise ValueError("model needs K >= 2")
        if np.any(self.phi < 0) or np.any(self.theta_train < 0):
            raise ValueError("negative probability entries")
        if not np.allclose(self.phi.sum(axis=1), 1.0, atol=tol):
            raise ValueError("phi rows must sum to 1")
        if self.theta_train.size and not np.allclose(self.theta_train.sum(axis=1), 1.0, atol=tol):
            raise ValueError("theta rows must sum to 1")

    def with_terms(self, terms: Sequence[str]) -> "TopicModel":
        if len(terms) != self.M:
            raise ValueError(f"expected {self.M} terms, got {len(terms)}")
        return replace(self, terms=tuple(terms), vocab_hash=vocabulary_hash(terms))


def vocabulary_hash(terms: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(terms).encode("utf-8")).hexdigest()


def _expand(bows: Sequence[DocBow], M: int) -> tuple[np.ndarray, np.ndarray]:
    """Flatten bags into parallel (doc, word) index arrays.

    Tokens within a document are laid out in ascending term order, which
    keeps the expansion (and so the whole sampler) deterministic.
    """
    doc_ids: list[int] = []
    word_ids: list[int] = []
    for d, bow in enumerate(bows):
        for m in sorted(bow.counts):
            c = bow.counts[m]
            if m < 0 or m >= M:
                raise ValueError(f"term index {m} outside vocabulary of size {M}")
            doc_ids.extend([d] * c)
            word_ids.extend([m] * c)
    return (
        np.asarray(doc_ids, dtype=np.int32),
        np.asarray(word_ids, dtype=np.int32),
    )


def _infer_vocab_size(bows: Sequence[DocBow]) -> int:
    return 1 + max(max(b.counts) for b in bows if b.counts)


def train_lda(
    bows: Sequence[DocBow],
    K: int,
    alpha: float = 0.1,
    beta: float = 0.01,
    iterations: int = 500,
    seed: int = 0,
    M: int | None = None,
) -> TopicModel:
    """Collapsed Gibbs training; deterministic for fixed inputs and seed."""
    if not bows:
        raise ValueError("empty corpus")
    if any(b.is_empty for b in bows):
        raise ValueError("corpus contains empty documents; drop them before training")
    if K < 2:
        raise ValueError("K must be at least 2")
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    if iterations < 1:
        raise ValueError("iterations must be at least 1")

    if M is None:
        M = _infer_vocab_size(bows)
    doc_ids, word_ids = _expand(bows, M)
    n_kw, n_dk = _gibbs_train(
        doc_ids, word_ids, len(bows), K, M,
        float(alpha), float(beta), int(iterations),
        np.uint64(seed & _U64_MASK),
    )

    phi = n_kw.astype(np.float64) + beta
    phi /= phi.sum(axis=1, keepdims=True)
    theta = n_dk.astype(np.float64) + alpha
    theta /= theta.sum(axis=1, keepdims=True)

    model = TopicModel(
        K=K, M=M, phi=phi, theta_train=theta,
        alpha=alpha, beta=beta, seed=seed, iterations=iterations,
    )
    model.validate()
    return model


def infer(
    model: TopicModel,
    bow: DocBow,
    sweeps: int = 50,
    seed: int | None = None,
) -> np.ndarray:
    """Topic posterior for one document with the topic-word rows held fixed."""
    if bow.is_empty:
        raise ValueError(f"document {bow.doc_id!r} has no in-vocabulary tokens")
    if seed is None:
        seed = derive_seed(model.seed, "infer")
    word_ids = np.asarray(
        [m for m in sorted(bow.counts) for _ in range(bow.counts[m])],
        dtype=np.int32,
    )
    if word_ids.size and int(word_ids.max()) >= model.M:
        raise ValueError("document references terms outside the model vocabulary")
    return _gibbs_foldin(word_ids, model.phi, float(model.alpha), int(sweeps), np.uint64(seed & _U64_MASK))


def top_words(model: TopicModel, k: int, n: int = 10) -> list[str]:
    """Top ``n`` terms of 1-based cluster ``k``, ties by vocabulary order."""
    if not 1 <= k <= model.K:
        raise ValueError(f"cluster id {k} outside 1..{model.K}")
    if n > model.M:
        raise ValueError("n exceeds vocabulary size")
    if model.terms is None:
        raise ValueError("model carries no vocabulary terms")
    row = model.phi[k - 1]
    order = np.argsort(-row, kind="stable")[:n]
    return [model.terms[m] for m in order]


def heldout_perplexity(
    model: TopicModel,
    bows: Sequence[DocBow],
    sweeps: int = 50,
    seed: int | None = None,
) -> float:
    """Document-completion perplexity on held-out halves.

    Each document's tokens are shuffled with the evaluation seed; the even
    positions estimate the document mixture by fold-in, the odd positions
    are scored under sum_k theta[d,k] * phi[k,w].
    """
    if not bows:
        raise ValueError("no documents to score")
    if seed is None:
        seed = derive_seed(model.seed, "perplexity")
    rng = np.random.Generator(np.random.PCG64(seed))

    logl = 0.0
    n_heldout = 0
    for i, bow in enumerate(bows):
        tokens = np.asarray(
            [m for m in sorted(bow.counts) for _ in range(bow.counts[m])],
            dtype=np.int32,
        )
        if tokens.size == 0:
            continue
        if int(tokens.max()) >= model.M:
            raise ValueError("document references terms outside the model vocabulary")
        perm = rng.permutation(tokens.size)
        shuffled = tokens[perm]
        estimation = shuffled[0::2]
        heldout = shuffled[1::2]
        if heldout.size == 0:
            continue
        theta_d = _gibbs_foldin(
            estimation, model.phi, float(model.alpha), int(sweeps),
            np.uint64(derive_seed(seed, f"foldin:{i}") & _U64_MASK),
        )
        probs = theta_d @ model.phi[:, heldout]
        logl += float(np.log(probs).sum())
        n_heldout += heldout.size

    if n_heldout == 0:
        raise ValueError("no held-out tokens; documents are too short to score")
    return float(np.exp(-logl / n_heldout))


@dataclass(frozen=True)
class KSweepResult:
    rows: tuple[tuple[int, float], ...]
    best_k: int

    def to_csv(self) -> str:
        lines = ["K,perplexity"]
        lines += [f"{k},{p:.6f}" for k, p in self.rows]
        return "\n".join(lines) + "\n"


def k_sweep(
    bows_train: Sequence[DocBow],
    bows_validation: Sequence[DocBow],
    Ks: Sequence[int],
    alpha: float = 0.1,
    beta: float = 0.01,
    iterations: int = 500,
    seed: int = 0,
) -> KSweepResult:
    """Train one model per candidate K and score validation perplexity.

    Seeds are offset by the candidate's index so the runs are independent.
    """
    if not Ks:
        raise ValueError("no K candidates")
    M = max(_infer_vocab_size(bows_train), _infer_vocab_size(bows_validation))
    rows = []
    for i, K in enumerate(Ks):
        model = train_lda(bows_train, K, alpha, beta, iterations, seed=seed + i, M=M)
        perp = heldout_perplexity(model, bows_validation, seed=seed + i)
        rows.append((K, perp))
    best_k = min(rows, key=lambda r: r[1])[0]
    return KSweepResult(rows=tuple(rows), best_k=best_k)


def split_train_validation(
    bows: Sequence[DocBow],
    ratio: float = 0.8,
    seed: int = 0,
) -> tuple[list[DocBow], list[DocBow]]:
    """Seeded random split for perplexity-based K selection."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    order = np.random.Generator(np.random.PCG64(seed)).permutation(len(bows))
    n_train = int(round(len(bows) * ratio))
    train = [bows[i] for i in order[:n_train]]
    val = [bows[i] for i in order[n_train:]]
    return train, val


def save_model(model: TopicModel, path: str | Path) -> None:
    np.savez_compressed(
        Path(path),
        header=np.asarray([model.K, model.M, model.iterations], dtype=np.int64),
        hyper=np.asarray([model.alpha, model.beta], dtype=np.float64),
        seed=np.asarray([model.seed], dtype=np.uint64),
        phi=model.phi,
        theta=model.theta_train,
        vocab_hash=np.asarray(model.vocab_hash),
        terms=np.asarray(model.terms if model.terms is not None else [], dtype=object),
    )


def load_model(path: str | Path, expect_vocab_hash: str | None = None) -> TopicModel:
    with np.load(Path(path), allow_pickle=True) as data:
        K, M, iterations = (int(x) for x in data["header"])
        alpha, beta = (float(x) for x in data["hyper"])
        seed = int(data["seed"][0])
        vocab_hash = str(data["vocab_hash"])
        terms = tuple(str(t) for t in data["terms"]) or None
        model = TopicModel(
            K=K, M=M, phi=data["phi"], theta_train=data["theta"],
            alpha=alpha, beta=beta, seed=seed, iterations=iterations,
            vocab_hash=vocab_hash, terms=terms,
        )
    if expect_vocab_hash is not None and vocab_hash != expect_vocab_hash:
        raise ValueError("model was trained against a different vocabulary")
    model.validate()
    return model
