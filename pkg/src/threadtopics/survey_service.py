"""HTTP survey service: serves question banks, manages participant
sessions, enforces participation rules and persists responses.

Storage is an append-only JSONL event log per bank plus an optional
compacted snapshot; every acknowledged answer is flushed and fsynced
before the response goes out, so an export after a crash or restart
always contains it.
"""

from __future__ import annotations

import io
import json
import os
import random
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .topic_naming import NamingBank, NamingQuestion, question_id_for, valid_cluster_name
from .validation_survey import (
    NONE_OPTION,
    SurveyBank,
    SurveyResponse,
    ValidationQuestion,
    responses_csv,
)

SESSION_QUESTIONS = 20

Bank = SurveyBank | NamingBank


@dataclass
class Session:
    session_id: str
    participant_id: str
    bank_id: str
    assigned: tuple[str, ...]
    answered: set[str] = field(default_factory=set)
    screening_passed: bool = False
    screening_failed: bool = False
    expired: bool = False
    last_active: float = field(default_factory=time.monotonic)

    @property
    def completed(self) -> bool:
        return len(self.answered & set(self.assigned)) >= len(self.assigned)


class ParticipationError(Exception):
    """Duplicate entry or saturated bank."""


class InvalidAnswer(Exception):
    """Answer violating the response invariants."""


class SurveyStore:
    """All mutable survey state behind one writer lock.

    Mutations (session creation, answer recording) serialize through the
    lock and append to the event log before acknowledging; reads take the
    lock only long enough to snapshot small structures.
    """

    def __init__(
        self,
        data_dir: str | Path,
        answers_per_question: int = 3,
        session_questions: int = SESSION_QUESTIONS,
        session_timeout: float | None = None,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.answers_per_question = answers_per_question
        self.session_questions = session_questions
        self.session_timeout = session_timeout
        self._lock = threading.Lock()
        self.banks: dict[str, Bank] = {}
        self._questions: dict[str, dict] = {}  # bank -> qid -> question
        # bank -> responses in arrival order; bank -> qid -> answering participants
        self._responses: dict[str, list[SurveyResponse]] = {}
        self._by_question: dict[str, dict[str, set[str]]] = {}
        self.sessions: dict[str, Session] = {}
        self._entries: dict[tuple[str, str], str] = {}  # (bank, participant) -> session
        self._outstanding: dict[str, dict[str, int]] = {}
        self._logs: dict[str, io.TextIOWrapper] = {}
        self._load()

    # -- persistence --------------------------------------------------------

    def _bank_dir(self) -> Path:
        return self.data_dir / "banks"

    def _log_path(self, bank_id: str) -> Path:
        return self.data_dir / f"responses-{bank_id}.log"

    def _snapshot_path(self, bank_id: str) -> Path:
        return self.data_dir / f"snapshot-{bank_id}.json"

    def _load(self) -> None:
        bank_dir = self._bank_dir()
        if bank_dir.is_dir():
            for path in sorted(bank_dir.glob("*.json")):
                kind = json.loads(path.read_text(encoding="utf-8")).get("kind", "validation")
                bank = NamingBank.load(path) if kind == "naming" else SurveyBank.load(path)
                self._register_bank(bank)
        for bank_id in self.banks:
            snap = self._snapshot_path(bank_id)
            if snap.exists():
                for event in json.loads(snap.read_text(encoding="utf-8"))["events"]:
                    self._apply_event(event)
            log_path = self._log_path(bank_id)
            if log_path.exists():
                with log_path.open("r", encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if line:
                            self._apply_event(json.loads(line))

    def _register_bank(self, bank: Bank) -> None:
        self.banks[bank.bank_id] = bank
        self._questions[bank.bank_id] = bank.question_map()
        self._responses.setdefault(bank.bank_id, [])
        self._by_question.setdefault(bank.bank_id, {qid: set() for qid in self._questions[bank.bank_id]})
        self._outstanding.setdefault(bank.bank_id, {})

    def add_bank(self, bank: Bank) -> None:
        with self._lock:
            if bank.bank_id in self.banks:
                raise ValueError(f"bank {bank.bank_id!r} already registered")
            self._bank_dir().mkdir(parents=True, exist_ok=True)
            bank.save(self._bank_dir() / f"{bank.bank_id}.json")
            self._register_bank(bank)

    def _apply_event(self, event: dict) -> None:
        kind = event["event"]
        if kind == "session":
            s = Session(
                session_id=event["session_id"],
                participant_id=event["participant_id"],
                bank_id=event["bank_id"],
                assigned=tuple(event["assigned"]),
            )
            self.sessions[s.session_id] = s
            self._entries[(s.bank_id, s.participant_id)] = s.session_id
            for qid in s.assigned:
                self._bump_outstanding(s.bank_id, qid, +1)
        elif kind == "screening":
            s = self.sessions[event["session_id"]]
            s.screening_passed = event["passed"]
            s.screening_failed = not event["passed"]
            s.answered.add(event["question_id"])
            if s.screening_failed:
                self._release_session(s)
        elif kind == "answer":
            s = self.sessions.get(event["session_id"])
            response = SurveyResponse(
                question_id=event["question_id"],
                participant_id=event["participant_id"],
                selected=frozenset(event["selections"]),
                timestamp=str(event["timestamp"]),
            )
            bank_id = event["bank_id"]
            stored = event.get("stored", True)
            if stored:
                self._responses[bank_id].append(response)
                self._by_question[bank_id][response.question_id].add(response.participant_id)
            if s is not None:
                s.answered.add(response.question_id)
                self._bump_outstanding(bank_id, response.question_id, -1)
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _append(self, bank_id: str, event: dict) -> None:
        fh = self._logs.get(bank_id)
        if fh is None:
            fh = self._log_path(bank_id).open("a", encoding="utf-8")
            self._logs[bank_id] = fh
        fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")
        fh.flush()
        os.fsync(fh.fileno())

    @staticmethod
    def _screening_of(bank: Bank) -> ValidationQuestion | None:
        return bank.screening if isinstance(bank, SurveyBank) else None

    def compact(self, bank_id: str) -> None:
        """Fold the event log into a snapshot file and truncate the log."""
        with self._lock:
            events: list[dict] = []
            for s in self.sessions.values():
                if s.bank_id != bank_id:
                    continue
                events.append({
                    "event": "session", "session_id": s.session_id, "bank_id": bank_id,
                    "participant_id": s.participant_id, "assigned": list(s.assigned),
                })
                screening = self._screening_of(self.banks[bank_id])
                if screening and screening.question_id in s.answered:
                    events.append({
                        "event": "screening", "session_id": s.session_id,
                        "question_id": screening.question_id, "passed": s.screening_passed,
                    })
            session_of = {
                (s.bank_id, s.participant_id): s.session_id for s in self.sessions.values()
            }
            for r in self._responses[bank_id]:
                events.append({
                    "event": "answer", "bank_id": bank_id,
                    "session_id": session_of.get((bank_id, r.participant_id), ""),
                    "question_id": r.question_id, "participant_id": r.participant_id,
                    "timestamp": r.timestamp, "selections": sorted(r.selected),
                    "stored": True,
                })
            tmp = self._snapshot_path(bank_id).with_suffix(".tmp")
            tmp.write_text(json.dumps({"events": events}, ensure_ascii=False) + "\n", encoding="utf-8")
            os.replace(tmp, self._snapshot_path(bank_id))
            fh = self._logs.pop(bank_id, None)
            if fh is not None:
                fh.close()
            self._log_path(bank_id).unlink(missing_ok=True)

    def close(self) -> None:
        for fh in self._logs.values():
            fh.close()
        self._logs.clear()

    # -- bookkeeping --------------------------------------------------------

    def _bump_outstanding(self, bank_id: str, qid: str, delta: int) -> None:
        counts = self._outstanding[bank_id]
        counts[qid] = max(0, counts.get(qid, 0) + delta)

    def _recorded(self, bank_id: str, qid: str) -> int:
        return len(self._by_question[bank_id][qid])

    def _expire_idle(self) -> None:
        if self.session_timeout is None:
            return
        now = time.monotonic()
        for s in self.sessions.values():
            if s.expired or s.completed:
                continue
            if now - s.last_active > self.session_timeout:
                s.expired = True
                self._release_session(s)

    def _release_session(self, s: Session) -> None:
        for qid in s.assigned:
            if qid not in s.answered:
                self._bump_outstanding(s.bank_id, qid, -1)

    # -- operations ---------------------------------------------------------

    def create_session(self, participant_id: str, bank_id: str) -> Session:
        if not participant_id:
            raise InvalidAnswer("participant_id must be non-empty")
        with self._lock:
            bank = self.banks.get(bank_id)
            if bank is None:
                raise KeyError(bank_id)
            self._expire_idle()
            if (bank_id, participant_id) in self._entries:
                raise ParticipationError("participant has already entered this survey")
            candidates = [
                (self._recorded(bank_id, qid) + self._outstanding[bank_id].get(qid, 0), i, qid)
                for i, qid in enumerate(self._questions[bank_id])
            ]
            open_candidates = [c for c in candidates if c[0] < self.answers_per_question]
            if not open_candidates:
                raise ParticipationError("bank saturated")
            open_candidates.sort()
            chosen = [qid for _, _, qid in open_candidates[: self.session_questions]]
            random.Random(f"{bank_id}:{participant_id}").shuffle(chosen)
            session = Session(
                session_id=uuid.uuid4().hex,
                participant_id=participant_id,
                bank_id=bank_id,
                assigned=tuple(chosen),
            )
            self._append(bank_id, {
                "event": "session", "session_id": session.session_id, "bank_id": bank_id,
                "participant_id": participant_id, "assigned": list(session.assigned),
            })
            self.sessions[session.session_id] = session
            self._entries[(bank_id, participant_id)] = session.session_id
            for qid in session.assigned:
                self._bump_outstanding(bank_id, qid, +1)
            return session

    def _get_session(self, session_id: str) -> Session:
        s = self.sessions.get(session_id)
        if s is None:
            raise KeyError(session_id)
        return s

    def next_question(self, session_id: str) -> tuple[str, ValidationQuestion | NamingQuestion | None]:
        """(status, question): screening | question | done | screening_failed."""
        with self._lock:
            self._expire_idle()
            s = self._get_session(session_id)
            s.last_active = time.monotonic()
            screening = self._screening_of(self.banks[s.bank_id])
            if s.screening_failed:
                return "screening_failed", None
            if screening is not None and not s.screening_passed:
                return "screening", screening
            for qid in s.assigned:
                if qid in s.answered:
                    continue
                if self._recorded(s.bank_id, qid) >= self.answers_per_question:
                    # saturated by another participant meanwhile; skip it
                    s.answered.add(qid)
                    self._bump_outstanding(s.bank_id, qid, -1)
                    continue
                return "question", self._questions[s.bank_id][qid]
            return "done", None

    def submit_answer(self, session_id: str, question_id: str, selections: Sequence[str]) -> dict:
        with self._lock:
            self._expire_idle()
            s = self._get_session(session_id)
            if s.expired:
                raise ParticipationError("session expired")
            s.last_active = time.monotonic()
            bank = self.banks[s.bank_id]
            selected = frozenset(selections)
            screening = self._screening_of(bank)

            if screening is not None and question_id == screening.question_id:
                if question_id in s.answered:
                    return {"status": "ok", "duplicate": True, "screening_passed": s.screening_passed}
                self._validate_selection(selected, screening)
                passed = selected - {NONE_OPTION} == bank.screening_correct and NONE_OPTION not in selected
                self._append(s.bank_id, {
                    "event": "screening", "session_id": session_id,
                    "question_id": question_id, "passed": passed,
                })
                s.answered.add(question_id)
                s.screening_passed = passed
                s.screening_failed = not passed
                if not passed:
                    self._release_session(s)
                return {"status": "ok", "duplicate": False, "screening_passed": passed}

            if screening is not None and not s.screening_passed:
                raise InvalidAnswer("screening question must be answered correctly first")
            if question_id not in s.assigned:
                raise KeyError(question_id)
            if question_id in s.answered:
                return {"status": "ok", "duplicate": True, "stored": True}

            question = self._questions[s.bank_id][question_id]
            if isinstance(question, NamingQuestion):
                self._validate_name_answer(selected)
            else:
                self._validate_selection(selected, question)

            stored = self._recorded(s.bank_id, question_id) < self.answers_per_question
            event = {
                "event": "answer", "bank_id": s.bank_id, "session_id": session_id,
                "question_id": question_id, "participant_id": s.participant_id,
                "timestamp": str(int(time.time())), "selections": sorted(selected),
                "stored": stored,
            }
            self._append(s.bank_id, event)
            self._apply_event(event)
            return {"status": "ok", "duplicate": False, "stored": stored}

    @staticmethod
    def _validate_selection(selected: frozenset[str], question: ValidationQuestion) -> None:
        if not selected:
            raise InvalidAnswer("at least one option must be selected")
        allowed = set(question.options) | {NONE_OPTION}
        if not selected <= allowed:
            raise InvalidAnswer(f"selections outside the question's options: {sorted(selected - allowed)}")
        if NONE_OPTION in selected and len(selected) > 1:
            raise InvalidAnswer("none-of-the-above cannot be combined with topics")

    @staticmethod
    def _validate_name_answer(selected: frozenset[str]) -> None:
        if len(selected) != 1:
            raise InvalidAnswer("a naming answer is a single name")
        (name,) = selected
        if not valid_cluster_name(name):
            raise InvalidAnswer("cluster names are one or two words, or N/A")

    def export_csv(self, bank_id: str) -> str:
        with self._lock:
            if bank_id not in self.banks:
                raise KeyError(bank_id)
            responses = list(self._responses[bank_id])
        return responses_csv(responses)

    def progress(self, bank_id: str) -> dict:
        with self._lock:
            bank = self.banks.get(bank_id)
            if bank is None:
                raise KeyError(bank_id)
            counts = {qid: len(p) for qid, p in self._by_question[bank_id].items()}
            selection_counts: dict[str, dict[str, int]] = {}
            for r in self._responses[bank_id]:
                per = selection_counts.setdefault(r.question_id, {})
                for opt in sorted(r.selected):
                    per[opt] = per.get(opt, 0) + 1
            return {
                "bank_id": bank_id,
                "kind": "naming" if isinstance(bank, NamingBank) else "validation",
                "mode": bank.mode.value if isinstance(bank, SurveyBank) else "NAMING",
                "total_questions": len(self._questions[bank_id]),
                "answers_per_question": self.answers_per_question,
                "recorded": counts,
                "selection_counts": selection_counts,
                "total_answers": sum(counts.values()),
                "complete": all(c >= self.answers_per_question for c in counts.values()),
            }


class CreateSessionRequest(BaseModel):
    participant_id: str
    bank_id: str


class AnswerRequest(BaseModel):
    question_id: str
    selections: list[str]


def create_app(store: SurveyStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="threadtopics survey service")

    def _bank_info(b: Bank) -> dict:
        if isinstance(b, NamingBank):
            return {
                "bank_id": b.bank_id,
                "kind": "naming",
                "mode": "NAMING",
                "prompt": "",
                "total_questions": len(b.questions),
                "has_screening": False,
            }
        return {
            "bank_id": b.bank_id,
            "kind": "validation",
            "mode": b.mode.value,
            "prompt": b.prompt,
            "total_questions": len(b.questions),
            "has_screening": b.screening is not None,
        }

    @app.get("/api/banks")
    def list_banks():
        return [_bank_info(b) for b in store.banks.values()]

    @app.post("/api/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        try:
            s = store.create_session(req.participant_id, req.bank_id)
        except KeyError:
            raise HTTPException(404, f"unknown bank {req.bank_id!r}")
        except ParticipationError as exc:
            raise HTTPException(409, str(exc))
        except InvalidAnswer as exc:
            raise HTTPException(422, str(exc))
        info = _bank_info(store.banks[s.bank_id])
        return {
            "session_id": s.session_id,
            "bank_id": s.bank_id,
            "kind": info["kind"],
            "mode": info["mode"],
            "prompt": info["prompt"],
            "assigned_count": len(s.assigned),
        }

    @app.get("/api/sessions/{session_id}/next")
    def next_question(session_id: str):
        try:
            status, question = store.next_question(session_id)
        except KeyError:
            raise HTTPException(404, "unknown session")
        s = store.sessions[session_id]
        info = _bank_info(store.banks[s.bank_id])
        payload = {
            "status": status,
            "answered": len(s.answered & set(s.assigned)),
            "total": len(s.assigned),
        }
        if question is not None:
            body = question.to_json()
            if isinstance(question, NamingQuestion):
                body["question_id"] = question_id_for(question)
                body["kind"] = "naming"
            else:
                body["kind"] = "validation"
            payload["question"] = body
            payload["prompt"] = info["prompt"]
        return payload

    @app.post("/api/sessions/{session_id}/answers")
    def submit_answer(session_id: str, req: AnswerRequest):
        try:
            return store.submit_answer(session_id, req.question_id, req.selections)
        except KeyError as exc:
            raise HTTPException(404, f"unknown session or unassigned question: {exc}")
        except ParticipationError as exc:
            raise HTTPException(410, str(exc))
        except InvalidAnswer as exc:
            raise HTTPException(422, str(exc))

    @app.get("/api/banks/{bank_id}/export", response_class=PlainTextResponse)
    def export(bank_id: str):
        try:
            csv_text = store.export_csv(bank_id)
        except KeyError:
            raise HTTPException(404, f"unknown bank {bank_id!r}")
        return PlainTextResponse(csv_text, media_type="text/csv")

    @app.get("/api/banks/{bank_id}/progress")
    def progress(bank_id: str):
        try:
            return store.progress(bank_id)
        except KeyError:
            raise HTTPException(404, f"unknown bank {bank_id!r}")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
