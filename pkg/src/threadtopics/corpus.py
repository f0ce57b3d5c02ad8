"""Thread ingestion, verdict reconstruction, filtering and date splits.

Input archives are line-delimited JSON in the Pushshift field layout
(one post or comment object per line). Threads are reassembled from the
two streams, given a community verdict (from the post flair when it maps
to a judgment, otherwise from the highest-scoring tagged comment) and a
binary valence, then filtered and split for downstream modeling.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

log = logging.getLogger(__name__)


class Judgment(str, Enum):
    YTA = "YTA"
    NTA = "NTA"
    ESH = "ESH"
    NAH = "NAH"
    INFO = "INFO"


class Valence(str, Enum):
    YA = "YA"
    NA = "NA"
    NONE = "NONE"


class VerdictSource(str, Enum):
    FLAIR = "FLAIR"
    TOP_COMMENT = "TOP_COMMENT"


#: Judgments holding the poster at fault vs. not at fault.
_YA_JUDGMENTS = frozenset({Judgment.YTA, Judgment.ESH})
_NA_JUDGMENTS = frozenset({Judgment.NTA, Judgment.NAH})


def valence_of(judgment: Judgment | None) -> Valence:
    """Binary valence grouping: {YTA, ESH} -> YA, {NTA, NAH} -> NA."""
    if judgment in _YA_JUDGMENTS:
        return Valence.YA
    if judgment in _NA_JUDGMENTS:
        return Valence.NA
    return Valence.NONE


# A judgment tag counts only when standalone: delimited by non-alphanumerics
# or string boundaries ("nta" inside "nothing to add" must not match).
_TAG_RE = re.compile(r"(?<![0-9A-Za-z])(YTA|NTA|ESH|NAH|INFO)(?![0-9A-Za-z])", re.IGNORECASE)


def extract_judgment(text: str) -> Judgment | None:
    """First standalone judgment tag in ``text``, scanning left to right."""
    m = _TAG_RE.search(text)
    return Judgment(m.group(1).upper()) if m else None


@dataclass(frozen=True)
class Post:
    id: str
    title: str
    author_hash: str
    created_at: int
    body: str
    flair_text: str | None
    score: int
    comment_count: int


@dataclass(frozen=True)
class Comment:
    id: str
    parent_id: str
    post_id: str
    author_hash: str
    created_at: int
    score: int
    text: str
    judgment: Judgment | None = None


@dataclass(frozen=True)
class Thread:
    post: Post
    comments: tuple[Comment, ...]


@dataclass(frozen=True)
class VerdictedThread:
    thread: Thread
    verdict: Judgment
    verdict_source: VerdictSource
    valence: Valence
    #: Full text of the winning comment when the verdict came from one;
    #: used downstream for verdict-side lexicon scoring.
    verdict_text: str | None = None

    @property
    def post(self) -> Post:
        return self.thread.post


@dataclass
class ParseStats:
    parsed: int = 0
    skipped: int = 0


# Pushshift ids carry "t1_"/"t3_" type prefixes on link fields; strip them
# so parent links resolve against bare record ids.
_ID_PREFIX_RE = re.compile(r"^t\d_")


def _bare_id(value: str) -> str:
    return _ID_PREFIX_RE.sub("", value)


_POST_FIELDS = ("id", "title", "author", "created_utc", "selftext", "score", "num_comments")
_COMMENT_FIELDS = ("id", "parent_id", "link_id", "author", "created_utc", "score", "body")


def _post_from_record(rec: Mapping) -> Post:
    return Post(
        id=str(rec["id"]),
        title=str(rec["title"]),
        author_hash=str(rec["author"]),
        created_at=int(rec["created_utc"]),
        body=str(rec["selftext"]),
        flair_text=rec.get("link_flair_text"),
        score=int(rec["score"]),
        comment_count=int(rec["num_comments"]),
    )


def _comment_from_record(rec: Mapping) -> Comment:
    text = str(rec["body"])
    return Comment(
        id=str(rec["id"]),
        parent_id=_bare_id(str(rec["parent_id"])),
        post_id=_bare_id(str(rec["link_id"])),
        author_hash=str(rec["author"]),
        created_at=int(rec["created_utc"]),
        score=int(rec["score"]),
        text=text,
        judgment=extract_judgment(text),
    )


def parse_archive(
    path: str | Path,
    kind: str,
    stats: ParseStats | None = None,
) -> Iterator[Post | Comment]:
    """Stream records from a line-delimited archive.

    ``kind`` is ``"posts"`` or ``"comments"``. Malformed lines (bad JSON or
    missing required fields) are counted in ``stats`` and skipped; an
    unreadable file raises.
    """
    if kind not in ("posts", "comments"):
        raise ValueError(f"unknown archive kind {kind!r}")
    required = _POST_FIELDS if kind == "posts" else _COMMENT_FIELDS
    build = _post_from_record if kind == "posts" else _comment_from_record
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                missing = [f for f in required if f not in rec]
                if missing:
                    raise KeyError(missing[0])
                item = build(rec)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                if stats is not None:
                    stats.skipped += 1
                log.debug("skipping %s line %d of %s: %s", kind, lineno, path, exc)
                continue
            if stats is not None:
                stats.parsed += 1
            yield item


def assemble_threads(
    posts: Iterable[Post],
    comments: Iterable[Comment],
    stats: ParseStats | None = None,
) -> list[Thread]:
    """Group comments under their posts and validate the reply forest.

    Comments whose post is absent, whose parent does not resolve within
    the thread, or that would form a reply cycle are dropped (counted as
    skips). ``comment_count`` is rewritten to the number of comments
    actually attached.
    """
    posts = list(posts)
    by_post: dict[str, list[Comment]] = {p.id: [] for p in posts}
    for c in comments:
        bucket = by_post.get(c.post_id)
        if bucket is None:
            if stats is not None:
                stats.skipped += 1
            continue
        bucket.append(c)

    threads = []
    for post in posts:
        attached = _resolve_forest(post, by_post[post.id], stats)
        threads.append(
            Thread(
                post=replace(post, comment_count=len(attached)),
                comments=tuple(attached),
            )
        )
    return threads


def _resolve_forest(post: Post, comments: list[Comment], stats: ParseStats | None) -> list[Comment]:
    by_id = {c.id: c for c in comments}
    kept: list[Comment] = []
    for c in comments:
        ok = True
        if c.parent_id != post.id:
            # Walk parent links; a repeat or a dangling reference invalidates.
            seen = {c.id}
            cur = c.parent_id
            while cur != post.id:
                if cur in seen or cur not in by_id:
                    ok = False
                    break
                seen.add(cur)
                cur = by_id[cur].parent_id
        if ok:
            kept.append(c)
        elif stats is not None:
            stats.skipped += 1
    return kept


def reconstruct_verdict(
    thread: Thread,
    flair_map: Mapping[str, Judgment],
) -> VerdictedThread | None:
    """Attach a community verdict to ``thread``.

    A flair that maps to a judgment wins outright. Otherwise the verdict is
    the judgment of the highest-scoring tagged comment (ties broken by
    earliest timestamp, then smallest id). Returns None when neither path
    yields a judgment.
    """
    flair = thread.post.flair_text
    if flair is not None:
        judgment = flair_map.get(flair.strip().lower())
        if judgment is not None:
            return VerdictedThread(
                thread=thread,
                verdict=judgment,
                verdict_source=VerdictSource.FLAIR,
                valence=valence_of(judgment),
            )

    tagged = [c for c in thread.comments if c.judgment is not None]
    if not tagged:
        return None
    winner = min(tagged, key=lambda c: (-c.score, c.created_at, c.id))
    assert winner.judgment is not None
    return VerdictedThread(
        thread=thread,
        verdict=winner.judgment,
        verdict_source=VerdictSource.TOP_COMMENT,
        valence=valence_of(winner.judgment),
        verdict_text=winner.text,
    )


def normalize_flair_map(raw: Mapping[str, str]) -> dict[str, Judgment]:
    """Lowercase flair strings and coerce values to judgments."""
    return {k.strip().lower(): Judgment(v.strip().upper()) for k, v in raw.items()}


@dataclass(frozen=True)
class FilterRules:
    title_prefixes: tuple[str, ...] = ("AITA", "WIBTA")
    min_body_words: int = 50
    min_comments: int = 10
    min_score: int = 1
    require_verdict: bool = True


def _passes(item: Thread | VerdictedThread, rules: FilterRules) -> bool:
    post = item.post
    title = post.title.lstrip().lower()
    if not any(title.startswith(p.lower()) for p in rules.title_prefixes):
        return False
    if len(post.body.split()) < rules.min_body_words:
        return False
    if post.comment_count < rules.min_comments:
        return False
    if post.score < rules.min_score:
        return False
    if rules.require_verdict and not isinstance(item, VerdictedThread):
        return False
    return True


def filter_threads(
    threads: Sequence[Thread | VerdictedThread],
    rules: FilterRules = FilterRules(),
) -> list[Thread | VerdictedThread]:
    """Keep exactly the threads passing every rule, preserving order.

    Bare (unverdicted) threads fail the verdict-required rule.
    """
    return [t for t in threads if _passes(t, rules)]


def split_by_date(
    threads: Sequence[VerdictedThread],
    cutoff: int,
) -> tuple[list[VerdictedThread], list[VerdictedThread]]:
    """Partition into (train, test): posted at or before ``cutoff`` vs after."""
    train = [t for t in threads if t.post.created_at <= cutoff]
    test = [t for t in threads if t.post.created_at > cutoff]
    return train, test


# --- verdicted-corpus interchange file ------------------------------------

def thread_record(item: Thread | VerdictedThread) -> dict:
    """One flat record per thread for the verdicted-corpus file."""
    verdicted = isinstance(item, VerdictedThread)
    post = item.post
    return {
        "post_id": post.id,
        "created_utc": post.created_at,
        "title": post.title,
        "body": post.body,
        "verdict": item.verdict.value if verdicted else None,
        "verdict_source": item.verdict_source.value if verdicted else None,
        "valence": item.valence.value if verdicted else Valence.NONE.value,
        "score": post.score,
        "comment_count": post.comment_count,
        "verdict_text": item.verdict_text if verdicted else None,
    }


@dataclass(frozen=True)
class ThreadRecord:
    """Row of the verdicted-corpus file (no comment bodies attached)."""

    post_id: str
    created_utc: int
    title: str
    body: str
    verdict: Judgment | None
    verdict_source: VerdictSource | None
    valence: Valence
    score: int
    comment_count: int
    verdict_text: str | None = None

    @classmethod
    def from_json(cls, rec: Mapping) -> "ThreadRecord":
        return cls(
            post_id=rec["post_id"],
            created_utc=int(rec["created_utc"]),
            title=rec["title"],
            body=rec["body"],
            verdict=Judgment(rec["verdict"]) if rec.get("verdict") else None,
            verdict_source=VerdictSource(rec["verdict_source"]) if rec.get("verdict_source") else None,
            valence=Valence(rec.get("valence", "NONE")),
            score=int(rec["score"]),
            comment_count=int(rec["comment_count"]),
            verdict_text=rec.get("verdict_text"),
        )

    def passes(self, rules: FilterRules) -> bool:
        title = self.title.lstrip().lower()
        if not any(title.startswith(p.lower()) for p in rules.title_prefixes):
            return False
        if len(self.body.split()) < rules.min_body_words:
            return False
        if self.comment_count < rules.min_comments:
            return False
        if self.score < rules.min_score:
            return False
        if rules.require_verdict and self.verdict is None:
            return False
        return True


def record_to_json(rec: ThreadRecord) -> dict:
    return {
        "post_id": rec.post_id,
        "created_utc": rec.created_utc,
        "title": rec.title,
        "body": rec.body,
        "verdict": rec.verdict.value if rec.verdict else None,
        "verdict_source": rec.verdict_source.value if rec.verdict_source else None,
        "valence": rec.valence.value,
        "score": rec.score,
        "comment_count": rec.comment_count,
        "verdict_text": rec.verdict_text,
    }


def write_corpus_file(records: Iterable[dict], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def read_corpus_file(path: str | Path) -> list[ThreadRecord]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(ThreadRecord.from_json(json.loads(line)))
    return out
