"""Launch a real survey service on a fixture bank for the UI tests.

Usage: python3 serve_fixture.py <data_dir> <port>

Writes <data_dir>/info.json (bank id, screening answers) before binding,
so the test harness can drive a correct screening answer.
"""

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import uvicorn

from threadtopics.survey_service import SurveyStore, create_app
from threadtopics.topic_naming import OTHER_NAME, NamedTopics
from threadtopics.validation_survey import (
    SURVEY_PROMPT,
    QuestionMode,
    SurveyBank,
    make_screening,
    validation_bank,
)


@dataclass
class Doc:
    post_id: str
    title: str
    body: str


def build_bank(n_topics=8, docs_per_topic=4, per_topic=3, bank_id="train") -> SurveyBank:
    names = tuple(f"topic{i}" for i in range(n_topics))
    members = {name: frozenset({i + 1}) for i, name in enumerate(names)}
    members[OTHER_NAME] = frozenset({n_topics + 1})
    named = NamedTopics(
        names=names, meta_category={n: "things" for n in names},
        cluster_members=members, topic_counts={n: 0 for n in list(names) + [OTHER_NAME]},
        K=n_topics + 1,
    )
    docs, rows = [], []
    i = 0
    for t in range(n_topics):
        for _ in range(docs_per_topic):
            theta = np.zeros(n_topics + 1)
            theta[t] = 0.4
            theta[(t + 1) % n_topics] = 0.25
            theta[(t + 2) % n_topics] = 0.15
            theta[(t + 3) % n_topics] = 0.1
            theta[-1] = 1.0 - theta.sum()
            docs.append(Doc(f"p{i}", f"Example post {i}", f"body text of post {i} " * 5))
            rows.append(theta)
            i += 1
    theta = np.asarray(rows)
    questions = validation_bank(docs, named, theta, QuestionMode.TOP4, per_topic, seed=1)
    screening, correct = make_screening(docs, named, theta, seed=1)
    return SurveyBank(bank_id, QuestionMode.TOP4, SURVEY_PROMPT,
                      tuple(questions), screening, correct)


def main() -> None:
    data_dir = Path(sys.argv[1])
    port = int(sys.argv[2])
    data_dir.mkdir(parents=True, exist_ok=True)
    bank = build_bank()
    store = SurveyStore(data_dir, answers_per_question=3, session_questions=20)
    if bank.bank_id not in store.banks:
        store.add_bank(bank)
    (data_dir / "info.json").write_text(json.dumps({
        "bank_id": bank.bank_id,
        "screening_correct": sorted(bank.screening_correct),
        "screening_question_id": bank.screening.question_id,
        "total_questions": len(bank.questions),
    }))
    frontend_dir = Path(__file__).resolve().parent.parent
    ui_dir = frontend_dir if (frontend_dir / "index.html").exists() else None
    app = create_app(store, ui_dir=ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="error")


if __name__ == "__main__":
    main()
