"""Crowd validation banks and agreement statistics.

A bank holds one multiple-choice question per sampled post: four topic
options (top-4 by posterior, or top-2 plus two random distractors) in
randomized order, a fixed fifth none-of-the-above option, and one
designated screening question whose correct answer gates the rest of a
survey session.
"""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .topic_naming import OTHER_NAME, NamedTopics, top_topics

NONE_OPTION = "NONE_OF_THE_ABOVE"

SURVEY_PROMPT = (
    "What topics below best describe the theme of the following post? "
    "Do not let your ethical judgement of the author affect your choices here."
)


class QuestionMode(str, Enum):
    TOP4 = "TOP4"
    TOP2_RAND2 = "TOP2_RAND2"


class Provenance(str, Enum):
    TOP1 = "TOP1"
    TOP2 = "TOP2"
    TOP3 = "TOP3"
    TOP4 = "TOP4"
    RANDOM = "RANDOM"


_MODE_PROVENANCE = {
    QuestionMode.TOP4: [Provenance.TOP1, Provenance.TOP2, Provenance.TOP3, Provenance.TOP4],
    QuestionMode.TOP2_RAND2: [Provenance.TOP1, Provenance.TOP2, Provenance.RANDOM, Provenance.RANDOM],
}


@dataclass(frozen=True)
class ValidationQuestion:
    question_id: str
    post_id: str
    title: str
    body: str
    options: tuple[str, ...]                  # 4 topic names, presentation order
    provenance: Mapping[str, Provenance]      # option -> provenance
    mode: QuestionMode

    def __post_init__(self):
        if len(self.options) != 4 or len(set(self.options)) != 4:
            raise ValueError("question needs 4 distinct topic options")
        if OTHER_NAME in self.options:
            raise ValueError('"other" may not be offered as an option')
        expected = sorted(p.value for p in _MODE_PROVENANCE[self.mode])
        actual = sorted(self.provenance[o].value for o in self.options)
        if actual != expected:
            raise ValueError(f"provenance {actual} does not match mode {self.mode.value}")

    def option_for(self, provenance: Provenance) -> str | None:
        for opt in self.options:
            if self.provenance[opt] == provenance:
                return opt
        return None

    def to_json(self) -> dict:
        return {
            "question_id": self.question_id,
            "post_id": self.post_id,
            "title": self.title,
            "body": self.body,
            "options": list(self.options),
            "provenance": {o: self.provenance[o].value for o in self.options},
            "mode": self.mode.value,
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "ValidationQuestion":
        return cls(
            question_id=payload["question_id"],
            post_id=payload["post_id"],
            title=payload["title"],
            body=payload["body"],
            options=tuple(payload["options"]),
            provenance={o: Provenance(p) for o, p in payload["provenance"].items()},
            mode=QuestionMode(payload["mode"]),
        )


@dataclass(frozen=True)
class SurveyResponse:
    question_id: str
    participant_id: str
    selected: frozenset[str]
    timestamp: str = ""

    def __post_init__(self):
        if not self.selected:
            raise ValueError("a response must select at least one option")
        if NONE_OPTION in self.selected and len(self.selected) > 1:
            raise ValueError("none-of-the-above cannot co-occur with topic selections")

    def topic_selections(self) -> frozenset[str]:
        return self.selected - {NONE_OPTION}


def _doc_rankings(named: NamedTopics, theta: np.ndarray) -> list:
    return [top_topics(theta[d], named, 5) for d in range(theta.shape[0])]


def validation_bank(
    docs: Sequence,
    named: NamedTopics,
    theta: np.ndarray,
    mode: QuestionMode,
    per_topic: int,
    seed: int,
) -> list[ValidationQuestion]:
    """Sample ``per_topic`` posts per named topic and build their questions.

    A post is eligible for the topic that is its top-1 named topic; posts
    falling under "other" are excluded outright, and a topic with fewer
    posts than requested contributes all of them. Distractor topics in
    TOP2_RAND2 mode never collide with the top-2 or each other. Option
    order is a pure function of (seed, question_id).
    """
    if per_topic < 1:
        raise ValueError("per_topic must be at least 1")
    if theta.shape != (len(docs), len(named.all_names)):
        raise ValueError("theta must be (n_docs, n_named_topics)")

    rankings = _doc_rankings(named, theta)
    other_idx = list(named.all_names).index(OTHER_NAME) if OTHER_NAME in named.all_names else None
    by_topic: dict[str, list[int]] = {name: [] for name in named.names}
    for d, ranked in enumerate(rankings):
        top_name, top_p = ranked.items[0]
        if other_idx is not None and theta[d, other_idx] > top_p:
            continue  # the post belongs to the placeholder topic
        by_topic[top_name].append(d)

    questions = []
    for topic in named.names:
        pool = by_topic[topic]
        if not pool:
            continue
        rng = random.Random(f"{seed}:sample:{topic}")
        chosen = sorted(rng.sample(pool, min(per_topic, len(pool))))
        for d in chosen:
            questions.append(_build_question(docs[d], rankings[d], named, mode, seed))
    return questions


def _build_question(doc, ranked, named: NamedTopics, mode: QuestionMode, seed: int) -> ValidationQuestion:
    names = [name for name, _ in ranked.items]
    question_id = f"{mode.value.lower()}:{doc.post_id}"
    if mode == QuestionMode.TOP4:
        if len(names) < 4:
            raise ValueError("need at least 4 named topics for TOP4 questions")
        options = names[:4]
        provenance = {
            options[0]: Provenance.TOP1,
            options[1]: Provenance.TOP2,
            options[2]: Provenance.TOP3,
            options[3]: Provenance.TOP4,
        }
    else:
        top2 = names[:2]
        candidates = [n for n in named.names if n not in top2]
        if len(top2) < 2 or len(candidates) < 2:
            raise ValueError("need at least 4 named topics for TOP2_RAND2 questions")
        rng = random.Random(f"{seed}:distract:{question_id}")
        distractors = rng.sample(candidates, 2)
        options = top2 + distractors
        provenance = {
            top2[0]: Provenance.TOP1,
            top2[1]: Provenance.TOP2,
            distractors[0]: Provenance.RANDOM,
            distractors[1]: Provenance.RANDOM,
        }
    random.Random(f"{seed}:order:{question_id}").shuffle(options)
    return ValidationQuestion(
        question_id=question_id,
        post_id=doc.post_id,
        title=doc.title,
        body=doc.body,
        options=tuple(options),
        provenance=provenance,
        mode=mode,
    )


def make_screening(
    docs: Sequence,
    named: NamedTopics,
    theta: np.ndarray,
    seed: int,
) -> tuple[ValidationQuestion, frozenset[str]]:
    """Pick the post with the clearest two topics as the gate question.

    Correct answers are its top-2 topics; the question is built in TOP4
    mode so wrong-but-plausible options are present.
    """
    rankings = _doc_rankings(named, theta)
    best = max(
        range(len(docs)),
        key=lambda d: rankings[d].items[0][1] + rankings[d].items[1][1],
    )
    question = _build_question(docs[best], rankings[best], named, QuestionMode.TOP4, seed)
    question = ValidationQuestion(
        question_id=f"screening:{docs[best].post_id}",
        post_id=question.post_id,
        title=question.title,
        body=question.body,
        options=question.options,
        provenance=question.provenance,
        mode=question.mode,
    )
    correct = frozenset(name for name, _ in rankings[best].items[:2])
    return question, correct


@dataclass(frozen=True)
class SurveyBank:
    bank_id: str
    mode: QuestionMode
    prompt: str
    questions: tuple[ValidationQuestion, ...]
    screening: ValidationQuestion | None = None
    screening_correct: frozenset[str] = frozenset()

    def question_map(self) -> dict[str, ValidationQuestion]:
        return {q.question_id: q for q in self.questions}

    def to_json(self) -> dict:
        return {
            "bank_id": self.bank_id,
            "mode": self.mode.value,
            "prompt": self.prompt,
            "questions": [q.to_json() for q in self.questions],
            "screening": self.screening.to_json() if self.screening else None,
            "screening_correct": sorted(self.screening_correct),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "SurveyBank":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            bank_id=payload["bank_id"],
            mode=QuestionMode(payload["mode"]),
            prompt=payload["prompt"],
            questions=tuple(ValidationQuestion.from_json(q) for q in payload["questions"]),
            screening=ValidationQuestion.from_json(payload["screening"]) if payload.get("screening") else None,
            screening_correct=frozenset(payload.get("screening_correct", [])),
        )


RESPONSE_FIELDS = ("question_id", "participant_id", "timestamp", "selections")


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)
    answers_per_question: dict[str, int] = field(default_factory=dict)
    flagged_questions: list[str] = field(default_factory=list)


def ingest_responses(
    path: str | Path,
    bank: SurveyBank,
    expected_per_question: int = 3,
) -> tuple[list[SurveyResponse], IngestReport]:
    """Read and validate a response CSV against its bank.

    Rejected rows (unknown question, selection outside the question's
    options, conflicting none-of-the-above, repeat participation on a
    question) are reported with their line number, never fatal.
    """
    questions = bank.question_map()
    report = IngestReport()
    responses: list[SurveyResponse] = []
    seen: set[tuple[str, str]] = set()
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RESPONSE_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(RESPONSE_FIELDS)}")
        for lineno, row in enumerate(reader, start=2):
            question = questions.get(row["question_id"])
            if question is None:
                report.rejected.append((lineno, f"unknown question {row['question_id']!r}"))
                continue
            key = (row["question_id"], row["participant_id"])
            if key in seen:
                report.rejected.append((lineno, f"participant {row['participant_id']!r} already answered"))
                continue
            selected = frozenset(s for s in row["selections"].split("|") if s)
            allowed = set(question.options) | {NONE_OPTION}
            if not selected:
                report.rejected.append((lineno, "empty selection"))
                continue
            if not selected <= allowed:
                report.rejected.append((lineno, f"selection outside options: {sorted(selected - allowed)}"))
                continue
            if NONE_OPTION in selected and len(selected) > 1:
                report.rejected.append((lineno, "none-of-the-above combined with topics"))
                continue
            seen.add(key)
            responses.append(
                SurveyResponse(
                    question_id=row["question_id"],
                    participant_id=row["participant_id"],
                    selected=selected,
                    timestamp=row["timestamp"],
                )
            )
            report.accepted += 1

    for r in responses:
        report.answers_per_question[r.question_id] = report.answers_per_question.get(r.question_id, 0) + 1
    report.flagged_questions = sorted(
        q for q in questions
        if report.answers_per_question.get(q, 0) != expected_per_question
    )
    return responses, report


def responses_csv(responses: Sequence[SurveyResponse]) -> str:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf)
    writer.writerow(RESPONSE_FIELDS)
    for r in responses:
        writer.writerow([r.question_id, r.participant_id, r.timestamp, "|".join(sorted(r.selected))])
    return buf.getvalue()


def write_responses(responses: Sequence[SurveyResponse], path: str | Path) -> None:
    Path(path).write_text(responses_csv(responses), encoding="utf-8", newline="")


_TOP4_ROWS = ("Top-1 only", "Top-2 only", "Top-3 only", "Top-4 only",
              "Top-1 or 2", "Top-1 or 2 or 3", "None of the above")
_TOP2_ROWS = ("Top-1 only", "Top-2 only", "Top-1 or 2", "None of the above")

_ROW_PROVENANCE = {
    "Top-1 only": (Provenance.TOP1,),
    "Top-2 only": (Provenance.TOP2,),
    "Top-3 only": (Provenance.TOP3,),
    "Top-4 only": (Provenance.TOP4,),
    "Top-1 or 2": (Provenance.TOP1, Provenance.TOP2),
    "Top-1 or 2 or 3": (Provenance.TOP1, Provenance.TOP2, Provenance.TOP3),
}


def post_level_agreement(
    responses: Sequence[SurveyResponse],
    questions: Mapping[str, ValidationQuestion],
) -> list[tuple[str, float]]:
    """Share of responses (as a percentage) containing each answer type.

    The denominator for every row is the total number of responses. Top-3
    and Top-4 rows only apply to TOP4 banks.
    """
    if not responses:
        raise ValueError("no responses")
    modes = {questions[r.question_id].mode for r in responses}
    if len(modes) != 1:
        raise ValueError("responses span multiple question modes")
    rows = _TOP4_ROWS if modes.pop() == QuestionMode.TOP4 else _TOP2_ROWS

    hits = {label: 0 for label in rows}
    for r in responses:
        q = questions[r.question_id]
        for label in rows:
            if label == "None of the above":
                if NONE_OPTION in r.selected:
                    hits[label] += 1
                continue
            wanted = [q.option_for(p) for p in _ROW_PROVENANCE[label]]
            if any(opt is not None and opt in r.selected for opt in wanted):
                hits[label] += 1
    n = len(responses)
    return [(label, 100.0 * hits[label] / n) for label in rows]


def topic_agreement(
    responses: Sequence[SurveyResponse],
    questions: Mapping[str, ValidationQuestion],
) -> dict[str, float | None]:
    """Per topic: % of responses selecting it when shown as top-1 or top-2.

    Topics never presented with top-1/top-2 provenance get None.
    """
    presented: dict[str, int] = {}
    selected: dict[str, int] = {}
    all_topics: set[str] = set()
    for r in responses:
        q = questions[r.question_id]
        all_topics.update(q.options)
        for opt in q.options:
            if q.provenance[opt] in (Provenance.TOP1, Provenance.TOP2):
                presented[opt] = presented.get(opt, 0) + 1
                if opt in r.selected:
                    selected[opt] = selected.get(opt, 0) + 1
    return {
        t: (100.0 * selected.get(t, 0) / presented[t]) if t in presented else None
        for t in sorted(all_topics)
    }


def answer_length_distribution(
    responses: Sequence[SurveyResponse],
) -> tuple[dict[int, int], float]:
    """Histogram and mean of topics chosen per answer (none counts as 0)."""
    histogram: dict[int, int] = {}
    total = 0
    for r in responses:
        n = len(r.topic_selections())
        histogram[n] = histogram.get(n, 0) + 1
        total += n
    mean = total / len(responses) if responses else 0.0
    return dict(sorted(histogram.items())), mean
