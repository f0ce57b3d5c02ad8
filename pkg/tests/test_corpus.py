import json
import re

import pytest

from threadtopics.corpus import (
    Comment,
    FilterRules,
    Judgment,
    ParseStats,
    Post,
    Thread,
    Valence,
    VerdictedThread,
    VerdictSource,
    assemble_threads,
    extract_judgment,
    filter_threads,
    normalize_flair_map,
    parse_archive,
    reconstruct_verdict,
    split_by_date,
    valence_of,
)


def make_post(pid="p1", title="AITA for testing?", body="word " * 60, score=5,
              created=1_500_000_000, flair=None, n_comments=12):
    return Post(id=pid, title=title, author_hash="a1", created_at=created,
                body=body, flair_text=flair, score=score, comment_count=n_comments)


def make_comment(cid, text, score=1, created=1_500_000_100, pid="p1", parent=None):
    return Comment(id=cid, parent_id=parent or pid, post_id=pid, author_hash=f"u{cid}",
                   created_at=created, score=score, text=text,
                   judgment=extract_judgment(text))


def make_thread(post=None, comments=()):
    post = post or make_post(n_comments=len(comments))
    return Thread(post=post, comments=tuple(comments))


# --- tag extraction ----------------------------------------------------------

def _scan_oracle(text):
    """Position-scanning reference: first standalone tag, left to right."""
    tags = ("YTA", "NTA", "ESH", "NAH", "INFO")
    best = None
    for tag in tags:
        for m in re.finditer(re.escape(tag), text, re.IGNORECASE):
            before = text[m.start() - 1] if m.start() > 0 else " "
            after = text[m.end()] if m.end() < len(text) else " "
            if not before.isalnum() and not after.isalnum():
                if best is None or m.start() < best[0]:
                    best = (m.start(), tag)
                break
    return Judgment(best[1]) if best else None


def test_extract_single_tag():
    assert extract_judgment("NTA, she was rude first") == Judgment.NTA


def test_extract_first_occurrence_wins():
    text = "I'd say ESH but leaning YTA"
    assert extract_judgment(text) == Judgment.ESH
    assert extract_judgment(text) == _scan_oracle(text)


def test_extract_requires_standalone():
    assert extract_judgment("nothing to add here") is None


@pytest.mark.parametrize("text", [
    "YTA. full stop", "final verdict: nah", "(INFO) please", "esh/nta split",
    "NTAx is not a tag plus ESH later", "wordNTAword", "100% YTA!", "",
])
def test_extract_matches_scanning_oracle(text):
    assert extract_judgment(text) == _scan_oracle(text)


def test_valence_grouping_exhaustive():
    assert valence_of(Judgment.YTA) == Valence.YA
    assert valence_of(Judgment.ESH) == Valence.YA
    assert valence_of(Judgment.NTA) == Valence.NA
    assert valence_of(Judgment.NAH) == Valence.NA
    assert valence_of(Judgment.INFO) == Valence.NONE
    assert valence_of(None) == Valence.NONE


# --- archive parsing ---------------------------------------------------------

POST_REC = {"id": "p1", "title": "AITA?", "author": "h1", "created_utc": 1,
            "selftext": "body", "score": 2, "num_comments": 0}


def test_parse_archive_well_formed(tmp_path):
    path = tmp_path / "posts.jsonl"
    path.write_text("".join(
        json.dumps({**POST_REC, "id": f"p{i}"}) + "\n" for i in range(3)))
    stats = ParseStats()
    posts = list(parse_archive(path, "posts", stats))
    assert [p.id for p in posts] == ["p0", "p1", "p2"]
    assert (stats.parsed, stats.skipped) == (3, 0)


def test_parse_archive_skips_truncated_line(tmp_path):
    path = tmp_path / "posts.jsonl"
    lines = [json.dumps({**POST_REC, "id": f"p{i}"}) for i in range(5)]
    lines[2] = lines[2][:20]  # truncated JSON
    path.write_text("\n".join(lines) + "\n")
    stats = ParseStats()
    posts = list(parse_archive(path, "posts", stats))
    assert len(posts) == 4
    assert stats.skipped == 1


def test_parse_archive_empty_file(tmp_path):
    path = tmp_path / "posts.jsonl"
    path.write_text("")
    assert list(parse_archive(path, "posts")) == []


def test_parse_archive_missing_field_skipped(tmp_path):
    rec = dict(POST_REC)
    del rec["title"]
    path = tmp_path / "posts.jsonl"
    path.write_text(json.dumps(rec) + "\n")
    stats = ParseStats()
    assert list(parse_archive(path, "posts", stats)) == []
    assert stats.skipped == 1


def test_parse_archive_unreadable_is_fatal(tmp_path):
    with pytest.raises(OSError):
        list(parse_archive(tmp_path / "nope.jsonl", "posts"))


def test_comment_parsing_strips_link_prefixes(tmp_path):
    rec = {"id": "c1", "parent_id": "t3_p1", "link_id": "t3_p1", "author": "h",
           "created_utc": 5, "score": 1, "body": "NTA for sure"}
    path = tmp_path / "comments.jsonl"
    path.write_text(json.dumps(rec) + "\n")
    (comment,) = parse_archive(path, "comments")
    assert comment.parent_id == "p1"
    assert comment.post_id == "p1"
    assert comment.judgment == Judgment.NTA


def test_assemble_threads_builds_forest_and_fixes_count():
    post = make_post(n_comments=99)
    comments = [
        make_comment("c1", "NTA"),
        make_comment("c2", "reply", parent="c1"),
        make_comment("c3", "dangling", parent="c9"),  # unresolvable parent
    ]
    stats = ParseStats()
    (thread,) = assemble_threads([post], comments, stats)
    assert {c.id for c in thread.comments} == {"c1", "c2"}
    assert thread.post.comment_count == 2
    assert stats.skipped == 1


# --- verdict reconstruction ---------------------------------------------------

FLAIR_MAP = normalize_flair_map({
    "Not the A-hole": "NTA", "Asshole": "YTA", "Everyone Sucks": "ESH",
    "No A-holes here": "NAH", "Not enough info": "INFO",
})


def test_verdict_from_flair():
    thread = make_thread(make_post(flair="Not the A-hole"))
    v = reconstruct_verdict(thread, FLAIR_MAP)
    assert v.verdict == Judgment.NTA
    assert v.verdict_source == VerdictSource.FLAIR
    assert v.valence == Valence.NA


def test_verdict_from_highest_scoring_comment():
    thread = make_thread(comments=[
        make_comment("c1", "YTA clearly", score=12),
        make_comment("c2", "NTA", score=7),
    ])
    v = reconstruct_verdict(thread, FLAIR_MAP)
    assert v.verdict == Judgment.YTA
    assert v.verdict_source == VerdictSource.TOP_COMMENT
    assert v.verdict_text == "YTA clearly"


def test_verdict_none_when_no_flair_and_no_tags():
    thread = make_thread(comments=[make_comment("c1", "interesting story")])
    assert reconstruct_verdict(thread, FLAIR_MAP) is None


def test_verdict_unmappable_flair_falls_back_to_comments():
    thread = make_thread(
        make_post(flair="META"),
        comments=[make_comment("c1", "ESH", score=3)],
    )
    v = reconstruct_verdict(thread, FLAIR_MAP)
    assert v.verdict == Judgment.ESH
    assert v.verdict_source == VerdictSource.TOP_COMMENT


def test_verdict_tie_break_earliest_then_smallest_id():
    thread = make_thread(comments=[
        make_comment("c9", "NTA", score=5, created=100),
        make_comment("c2", "YTA", score=5, created=50),
        make_comment("c1", "ESH", score=5, created=50),
    ])
    v = reconstruct_verdict(thread, FLAIR_MAP)
    assert v.verdict == Judgment.ESH  # earliest timestamp, then smallest id


def test_verdict_untagged_high_scorer_is_ignored():
    thread = make_thread(comments=[
        make_comment("c1", "great story!", score=100),
        make_comment("c2", "NAH honestly", score=2),
    ])
    assert reconstruct_verdict(thread, FLAIR_MAP).verdict == Judgment.NAH


def test_reconstruct_is_deterministic():
    thread = make_thread(comments=[
        make_comment("c1", "YTA", score=3), make_comment("c2", "NTA", score=8)])
    first = reconstruct_verdict(thread, FLAIR_MAP)
    for _ in range(5):
        assert reconstruct_verdict(thread, FLAIR_MAP) == first


# --- filtering ----------------------------------------------------------------

def verdicted(title="AITA x?", words=60, comments=12, score=3, judgment=Judgment.NTA):
    post = make_post(title=title, body="w " * words, score=score, n_comments=comments)
    return VerdictedThread(
        thread=Thread(post=post, comments=()),
        verdict=judgment,
        verdict_source=VerdictSource.FLAIR,
        valence=valence_of(judgment),
    )


def bare(title="AITA x?", words=60, comments=12, score=3):
    post = make_post(title=title, body="w " * words, score=score, n_comments=comments)
    return Thread(post=post, comments=())


def fixture_20_threads():
    """Hand-verified: exactly threads 1, 4, 8, 10, 13, 15, 18 pass (7)."""
    return [
        verdicted(),                                           # 1 pass: all rules ok
        verdicted(title="META: update on rules"),              # 2 fail: title prefix
        verdicted(words=49),                                   # 3 fail: 49 < 50 body words
        verdicted(title="WIBTA if I left?", words=50,
                  comments=10, score=1),                       # 4 pass: every rule at its boundary
        verdicted(comments=9),                                 # 5 fail: 9 < 10 comments
        verdicted(score=0),                                    # 6 fail: score below 1
        bare(),                                                # 7 fail: no verdict
        verdicted(title="aita for shouting?"),                 # 8 pass: prefix is case-insensitive
        verdicted(title="Am I the asshole here?"),             # 9 fail: spelled-out title
        verdicted(judgment=Judgment.ESH),                      # 10 pass: ESH is a verdict
        verdicted(words=1),                                    # 11 fail: one-word body
        verdicted(score=-5),                                   # 12 fail: negative score
        verdicted(judgment=Judgment.INFO),                     # 13 pass: INFO counts as a verdict
        verdicted(comments=0),                                 # 14 fail: no comments
        verdicted(words=500, comments=400, score=9000),        # 15 pass: large thread
        verdicted(title="[mod] announcement", score=0),        # 16 fail: title and score
        bare(words=10),                                        # 17 fail: no verdict, short body
        verdicted(title="wibta for asking?",
                  judgment=Judgment.NAH),                      # 18 pass: lowercase WIBTA
        verdicted(words=49, comments=50),                      # 19 fail: body words again
        verdicted(comments=9, score=50),                       # 20 fail: comments again
    ]


def test_filter_fixture_keeps_exactly_the_seven():
    threads = fixture_20_threads()
    kept = filter_threads(threads)
    expected = [threads[i - 1] for i in (1, 4, 8, 10, 13, 15, 18)]
    assert kept == expected


def test_filter_idempotent():
    threads = fixture_20_threads()
    once = filter_threads(threads)
    assert filter_threads(once) == once


def test_filter_rules_are_configurable():
    rules = FilterRules(title_prefixes=("AITA",), min_body_words=1,
                        min_comments=0, min_score=0, require_verdict=False)
    threads = [bare(title="AITA?", words=1, comments=0, score=0)]
    assert filter_threads(threads, rules) == threads


# --- date split ----------------------------------------------------------------

CUTOFF = 1_577_836_799  # 2019-12-31T23:59:59Z


def at(created):
    post = make_post(created=created)
    return VerdictedThread(Thread(post=post, comments=()), Judgment.NTA,
                           VerdictSource.FLAIR, Valence.NA)


def test_split_partitions_by_cutoff():
    early, late = at(1_556_668_800), at(1_577_923_200)  # 2019-05-01, 2020-01-02
    train, test = split_by_date([early, late], CUTOFF)
    assert train == [early]
    assert test == [late]


def test_split_cutoff_is_inclusive_on_train_side():
    boundary = at(CUTOFF)
    train, test = split_by_date([boundary], CUTOFF)
    assert train == [boundary]
    assert test == []


def test_split_empty_input():
    assert split_by_date([], CUTOFF) == ([], [])


def test_split_is_a_partition():
    threads = [at(CUTOFF + d) for d in (-5, -1, 0, 1, 5, 100)]
    train, test = split_by_date(threads, CUTOFF)
    assert train + test != [] and len(train) + len(test) == len(threads)
    assert set(id(t) for t in train).isdisjoint(id(t) for t in test)
    assert [t for t in threads if t in train or t in test] == threads
