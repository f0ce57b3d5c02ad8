"""Verify the export -> ingestion -> agreement round trip against the
service's live counters.

Usage: python3 check_roundtrip.py <data_dir>
Expects <data_dir>/banks/train.json, export.csv and progress.json.
Exits nonzero with a message on any mismatch.
"""

import json
import sys
from pathlib import Path

from threadtopics.validation_survey import (
    Provenance,
    SurveyBank,
    ingest_responses,
    post_level_agreement,
    topic_agreement,
)


def main() -> None:
    data_dir = Path(sys.argv[1])
    bank = SurveyBank.load(data_dir / "banks" / "train.json")
    progress = json.loads((data_dir / "progress.json").read_text())

    responses, report = ingest_responses(data_dir / "export.csv", bank)
    if report.rejected:
        sys.exit(f"export rows rejected on ingestion: {report.rejected}")
    if report.accepted != progress["total_answers"]:
        sys.exit(f"accepted {report.accepted} != live total {progress['total_answers']}")

    recorded = {q: c for q, c in progress["recorded"].items() if c}
    if report.answers_per_question != recorded:
        sys.exit("per-question answer counts differ from live counters")

    by_option: dict[str, dict[str, int]] = {}
    for r in responses:
        per = by_option.setdefault(r.question_id, {})
        for opt in r.selected:
            per[opt] = per.get(opt, 0) + 1
    if by_option != {q: c for q, c in progress["selection_counts"].items() if c}:
        sys.exit("per-option selection counts differ from live counters")

    questions = bank.question_map()
    rates = topic_agreement(responses, questions)
    # recompute the same rates straight from the live counters
    presented: dict[str, int] = {}
    selected: dict[str, int] = {}
    for qid, q in questions.items():
        n_answers = progress["recorded"].get(qid, 0)
        for opt in q.options:
            if q.provenance[opt] in (Provenance.TOP1, Provenance.TOP2):
                presented[opt] = presented.get(opt, 0) + n_answers
                selected[opt] = selected.get(opt, 0) + progress["selection_counts"].get(qid, {}).get(opt, 0)
    for topic, rate in rates.items():
        live = (100 * selected.get(topic, 0) / presented[topic]) if presented.get(topic) else None
        if (rate is None) != (live is None) or (rate is not None and abs(rate - live) > 1e-9):
            sys.exit(f"topic agreement mismatch for {topic}: {rate} vs {live}")

    table = dict(post_level_agreement(responses, questions))
    for label, provenance in (("Top-1 only", Provenance.TOP1), ("Top-2 only", Provenance.TOP2)):
        live_hits = 0
        for qid, q in questions.items():
            opt = q.option_for(provenance)
            live_hits += progress["selection_counts"].get(qid, {}).get(opt, 0)
        live_rate = 100 * live_hits / progress["total_answers"]
        if abs(table[label] - live_rate) > 1e-9:
            sys.exit(f"post-level {label} mismatch: {table[label]} vs {live_rate}")

    print("ROUNDTRIP OK", report.accepted, "responses")


if __name__ == "__main__":
    main()
