"""Human-in-the-loop topic naming: survey bank generation, ingestion of
adjudicated name decisions, cluster merging, posterior aggregation and
topic-pair extraction.

Cluster ids are 1-based everywhere a human sees them; array indices stay
0-based internally.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .topic_model import TopicModel, top_words

log = logging.getLogger(__name__)

OTHER_NAME = "other"
META_CATEGORIES = ("identities", "things", "processes", "events", "aspects")

PREVIEW_WORDS = 100
TRUNCATION_MARK = "[...]"


class Decision(str, Enum):
    UNANIMOUS = "UNANIMOUS"
    WORDING = "WORDING"
    DELIBERATION = "DELIBERATION"
    OTHER = "OTHER"


@dataclass(frozen=True)
class PostExample:
    post_id: str
    title: str
    body_preview: str
    selection: str  # TOP or RANDOM


@dataclass(frozen=True)
class NamingQuestion:
    cluster_id: int
    keywords: tuple[str, ...]
    example_posts: tuple[PostExample, ...]
    flagged: bool = False

    def __post_init__(self):
        if len(self.keywords) != 10:
            raise ValueError("naming question needs exactly 10 keywords")
        if not self.flagged:
            kinds = sorted(p.selection for p in self.example_posts)
            if len(self.example_posts) != 6 or kinds != ["RANDOM"] * 3 + ["TOP"] * 3:
                raise ValueError("unflagged question needs 3 TOP and 3 RANDOM posts")

    def to_json(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "keywords": list(self.keywords),
            "example_posts": [
                {
                    "post_id": p.post_id,
                    "title": p.title,
                    "body_preview": p.body_preview,
                    "selection": p.selection,
                }
                for p in self.example_posts
            ],
            "flagged": self.flagged,
        }


def body_preview(body: str, n_words: int = PREVIEW_WORDS) -> str:
    words = body.split()
    if len(words) <= n_words:
        return " ".join(words)
    return " ".join(words[:n_words]) + " " + TRUNCATION_MARK


def naming_bank(
    model: TopicModel,
    docs: Sequence,
    seed: int,
    random_source: str = "uniform",
) -> list[NamingQuestion]:
    """One naming question per cluster.

    ``docs`` aligns with the model's training rows and exposes
    ``post_id``/``title``/``body``. Per cluster: the 10 most probable
    keywords, the 3 assigned posts with the highest cluster posterior, and
    3 more assigned posts picked either uniformly at random
    (``random_source="uniform"``) or from the lowest posteriors
    (``"low_posterior"``). Clusters with fewer than 6 assigned posts get
    all of them and are flagged.
    """
    if len(docs) != model.theta_train.shape[0]:
        raise ValueError("docs must align with the model's training documents")
    if random_source not in ("uniform", "low_posterior"):
        raise ValueError(f"unknown random_source {random_source!r}")

    top1 = model.theta_train.argmax(axis=1)
    questions = []
    for k in range(1, model.K + 1):
        assigned = np.flatnonzero(top1 == k - 1)
        if assigned.size == 0:
            raise ValueError(f"cluster {k} has no assigned posts")
        post_prob = model.theta_train[assigned, k - 1]
        by_prob = assigned[np.argsort(-post_prob, kind="stable")]

        top_docs = list(by_prob[:3])
        pool = list(by_prob[3:])
        if random_source == "uniform":
            rng = random.Random(f"{seed}:naming:{k}")
            rand_docs = rng.sample(pool, min(3, len(pool)))
        else:
            rand_docs = pool[-3:][::-1]  # lowest posteriors first

        examples = [
            PostExample(
                post_id=docs[d].post_id,
                title=docs[d].title,
                body_preview=body_preview(docs[d].body),
                selection="TOP",
            )
            for d in top_docs
        ] + [
            PostExample(
                post_id=docs[d].post_id,
                title=docs[d].title,
                body_preview=body_preview(docs[d].body),
                selection="RANDOM",
            )
            for d in rand_docs
        ]
        questions.append(
            NamingQuestion(
                cluster_id=k,
                keywords=tuple(top_words(model, k, 10)),
                example_posts=tuple(examples),
                flagged=len(examples) < 6,
            )
        )
    return questions


#: Answer sentinel for "no coherent name is possible".
NO_NAME = "N/A"


@dataclass(frozen=True)
class NamingBank:
    """Expert naming survey: one free-text question per cluster."""

    bank_id: str
    questions: tuple[NamingQuestion, ...]

    def question_map(self) -> dict[str, NamingQuestion]:
        return {question_id_for(q): q for q in self.questions}

    def to_json(self) -> dict:
        return {
            "kind": "naming",
            "bank_id": self.bank_id,
            "questions": [q.to_json() for q in self.questions],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "NamingBank":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("kind") != "naming":
            raise ValueError(f"{path} is not a naming bank")
        return cls(
            bank_id=payload["bank_id"],
            questions=tuple(_question_from_json(q) for q in payload["questions"]),
        )


def question_id_for(question: NamingQuestion) -> str:
    return f"cluster:{question.cluster_id}"


def _question_from_json(payload: Mapping) -> NamingQuestion:
    return NamingQuestion(
        cluster_id=int(payload["cluster_id"]),
        keywords=tuple(payload["keywords"]),
        example_posts=tuple(
            PostExample(
                post_id=p["post_id"], title=p["title"],
                body_preview=p["body_preview"], selection=p["selection"],
            )
            for p in payload["example_posts"]
        ),
        flagged=bool(payload.get("flagged", False)),
    )


def valid_cluster_name(answer: str) -> bool:
    """Naming answers are one or two words, or the N/A sentinel."""
    answer = answer.strip()
    if answer == NO_NAME:
        return True
    return bool(answer) and len(answer.split()) <= 2 and "|" not in answer


def save_naming_bank(
    questions: Sequence[NamingQuestion],
    path: str | Path,
    bank_id: str = "naming",
) -> None:
    NamingBank(bank_id=bank_id, questions=tuple(questions)).save(path)


@dataclass(frozen=True)
class NameMap:
    entries: Mapping[int, str]
    decision: Mapping[int, Decision]

    def __post_init__(self):
        for cid, name in self.entries.items():
            if not name:
                raise ValueError(f"cluster {cid} has an empty name")
            d = self.decision.get(cid)
            if d is None:
                raise ValueError(f"cluster {cid} has no decision")
            if (d == Decision.OTHER) != (name == OTHER_NAME):
                raise ValueError(f"cluster {cid}: OTHER decision and name {name!r} disagree")


def resolve_names(
    answers: Mapping[int, Sequence[str]],
    decisions_file: str | Path,
) -> NameMap:
    """Build the cluster -> name map from the adjudicated decisions file.

    ``answers`` holds the three raw survey responses per cluster and is
    validated for completeness; the final names always come from the human
    adjudication recorded in ``decisions_file``.
    """
    for cid, given in answers.items():
        if len(given) != 3:
            raise ValueError(f"cluster {cid} has {len(given)} answers, expected 3")
    name_map = load_name_map(decisions_file)
    missing = set(answers) - set(name_map.entries)
    if missing:
        raise ValueError(f"decisions file lacks clusters: {sorted(missing)}")
    return name_map


def load_name_map(path: str | Path) -> NameMap:
    entries: dict[int, str] = {}
    decision: dict[int, Decision] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cid_s, name, dec = line.split("\t")
            cid = int(cid_s)
            if cid in entries:
                raise ValueError(f"duplicate cluster id {cid} in name map")
            entries[cid] = name
            decision[cid] = Decision(dec)
    return NameMap(entries=entries, decision=decision)


def save_name_map(name_map: NameMap, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for cid in sorted(name_map.entries):
            fh.write(f"{cid}\t{name_map.entries[cid]}\t{name_map.decision[cid].value}\n")


def load_meta_categories(path: str | Path) -> dict[str, str]:
    meta: dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            name, category = line.split("\t")
            if category not in META_CATEGORIES:
                raise ValueError(f"unknown meta-category {category!r} for topic {name!r}")
            meta[name] = category
    return meta


def packaged_fixture(name: str) -> Path:
    """Path of a data file bundled with the package."""
    return Path(resources.files("threadtopics").joinpath("data", name))


@dataclass(frozen=True)
class NamedTopics:
    names: tuple[str, ...]                      # distinct non-"other" names
    meta_category: Mapping[str, str]
    cluster_members: Mapping[str, frozenset[int]]  # includes "other" when present
    topic_counts: Mapping[str, int]             # posts under top-1 assignment
    K: int

    @property
    def all_names(self) -> tuple[str, ...]:
        if OTHER_NAME in self.cluster_members:
            return self.names + (OTHER_NAME,)
        return self.names

    def aggregation_matrix(self) -> np.ndarray:
        """0/1 matrix A with A[t, c-1] = 1 iff cluster c belongs to topic t."""
        A = np.zeros((len(self.all_names), self.K))
        for t, name in enumerate(self.all_names):
            for cid in self.cluster_members[name]:
                A[t, cid - 1] = 1.0
        return A

    def to_json(self) -> dict:
        return {
            "names": list(self.names),
            "meta_category": dict(self.meta_category),
            "cluster_members": {n: sorted(m) for n, m in self.cluster_members.items()},
            "topic_counts": dict(self.topic_counts),
            "K": self.K,
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "NamedTopics":
        return cls(
            names=tuple(payload["names"]),
            meta_category=dict(payload["meta_category"]),
            cluster_members={n: frozenset(m) for n, m in payload["cluster_members"].items()},
            topic_counts=dict(payload["topic_counts"]),
            K=int(payload["K"]),
        )


def merge_topics(
    model: TopicModel,
    name_map: NameMap,
    meta: Mapping[str, str],
) -> NamedTopics:
    """Merge clusters sharing a name into named topics.

    Every named topic must carry a meta-category; names in ``meta`` that
    map to no cluster only get a warning. Per-topic post counts use top-1
    cluster assignment on the training posteriors.
    """
    if set(name_map.entries) != set(range(1, model.K + 1)):
        raise ValueError(f"name map must cover exactly clusters 1..{model.K}")

    members: dict[str, set[int]] = {}
    names: list[str] = []
    for cid in sorted(name_map.entries):
        name = name_map.entries[cid]
        if name not in members:
            members[name] = set()
            if name != OTHER_NAME:
                names.append(name)
        members[name].add(cid)

    for name in names:
        if name not in meta:
            raise ValueError(f"named topic {name!r} missing from meta-category file")
    for name in meta:
        if name not in members:
            log.warning("meta-category file names unknown topic %r", name)

    top1 = model.theta_train.argmax(axis=1) + 1
    counts = {name: 0 for name in members}
    for cid in top1:
        counts[name_map.entries[int(cid)]] += 1

    return NamedTopics(
        names=tuple(names),
        meta_category={n: meta[n] for n in names},
        cluster_members={n: frozenset(m) for n, m in members.items()},
        topic_counts=counts,
        K=model.K,
    )


def aggregate_posterior(theta_d: np.ndarray, named: NamedTopics) -> np.ndarray:
    """Sum member-cluster posteriors per name; aligned with ``all_names``.

    The "other" mass stays in the vector (last entry) but is excluded from
    rankings downstream.
    """
    theta_d = np.asarray(theta_d, dtype=np.float64)
    if theta_d.shape != (named.K,):
        raise ValueError(f"expected posterior of length {named.K}")
    return named.aggregation_matrix() @ theta_d


@dataclass(frozen=True)
class RankedTopics:
    items: tuple[tuple[str, float], ...]
    gap: float  # top-1 minus top-2 probability


def top_topics(named_theta: np.ndarray, named: NamedTopics, n: int) -> RankedTopics:
    """Top ``n`` non-"other" names by probability, ties by name order."""
    probs = {name: float(named_theta[i]) for i, name in enumerate(named.all_names)}
    probs.pop(OTHER_NAME, None)
    order = {name: i for i, name in enumerate(named.names)}
    ranked = sorted(probs.items(), key=lambda item: (-item[1], order[item[0]]))
    gap = ranked[0][1] - ranked[1][1] if len(ranked) >= 2 else ranked[0][1]
    return RankedTopics(items=tuple(ranked[:n]), gap=gap)


@dataclass(frozen=True)
class TopicPair:
    a: str
    b: str

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("topic pair members must differ")
        if OTHER_NAME in (self.a, self.b):
            raise ValueError('topic pairs never include "other"')
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    def __iter__(self):
        return iter((self.a, self.b))


def topic_pair(named_theta: np.ndarray, named: NamedTopics) -> TopicPair:
    """Unordered pair of the two highest-probability named topics."""
    ranked = top_topics(named_theta, named, 2)
    positive = [(name, p) for name, p in ranked.items if p > 0]
    if len(positive) < 2:
        raise ValueError("fewer than two named topics with positive mass")
    return TopicPair(positive[0][0], positive[1][0])
