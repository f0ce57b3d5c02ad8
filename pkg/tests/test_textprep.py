import re

import pytest
from hypothesis import given, strategies as st

from threadtopics.textprep import (
    PLACEHOLDER,
    DocBow,
    Vocabulary,
    build_vocabulary,
    lemmatize,
    load_lemma_table,
    load_stopwords,
    scrub,
    tokenize,
    vectorize,
)


# --- scrubbing ---------------------------------------------------------------

def test_scrub_mentions_and_urls():
    assert scrub("thanks u/bob see https://x.y") == f"thanks {PLACEHOLDER} see {PLACEHOLDER}"


def test_scrub_no_links_unchanged():
    assert scrub("no links here") == "no links here"


def test_scrub_keeps_subreddit_names():
    # reference oracle: only user mentions and http(s) URLs are rewritten
    cases = {
        "r/AmItheAsshole is fun": "r/AmItheAsshole is fun",
        "/u/alice said so": f"{PLACEHOLDER} said so",
        "u/bob_2 and r/books": f"{PLACEHOLDER} and r/books",
        "see http://a.b/c?d=1 now": f"see {PLACEHOLDER} now",
        "fu/bar is not a mention": "fu/bar is not a mention",
        "r/unpopularopinion stays": "r/unpopularopinion stays",
    }
    oracle_user = re.compile(r"(?<![\w/])/?u/[A-Za-z0-9_-]+")
    oracle_url = re.compile(r"https?://\S+")
    for text, expected in cases.items():
        assert scrub(text) == expected
        oracle = oracle_user.sub(PLACEHOLDER, oracle_url.sub(PLACEHOLDER, text))
        assert scrub(text) == oracle


# --- tokenization --------------------------------------------------------------

def test_tokenize_rules_applied_by_hand():
    # lowercase; split on non-letter/digit; drop digits and 1-char tokens
    assert tokenize("My sister's DOG barked 3 times") == ["my", "sister", "dog", "barked", "times"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_unicode_boundaries():
    assert tokenize("café—menu") == ["café", "menu"]
    assert tokenize("naïve,résumé") == ["naïve", "résumé"]


def test_tokenize_drops_pure_digits_keeps_mixed():
    assert tokenize("room 101 has 2 a1 units") == ["room", "has", "a1", "units"]


def test_tokenize_underscore_is_boundary():
    assert tokenize("snake_case_words") == ["snake", "case", "words"]


# --- lemmatization --------------------------------------------------------------

def test_lemmatize_table_lookup():
    assert lemmatize(["barked", "dogs"], {"barked": "bark", "dogs": "dog"}) == ["bark", "dog"]


def test_lemmatize_missing_token_passthrough():
    assert lemmatize(["zorp"], {"dogs": "dog"}) == ["zorp"]


def test_lemmatize_empty_table_is_identity():
    tokens = ["a", "b", "c"]
    assert lemmatize(tokens, {}) == tokens


def test_load_lemma_table_and_stopwords(tmp_path):
    lt = tmp_path / "lemmas.tsv"
    lt.write_text("dogs\tdog\nbarked\tbark\n")
    assert load_lemma_table(lt) == {"dogs": "dog", "barked": "bark"}
    sw = tmp_path / "stop.txt"
    sw.write_text("the\nand\n\n# comment\n")
    assert load_stopwords(sw) == {"the", "and"}


# --- vocabulary -------------------------------------------------------------------

def test_vocabulary_min_df_inclusive():
    docs = [["family"]] * 30
    vocab = build_vocabulary(docs, min_df=20)
    assert "family" in vocab.index


def test_vocabulary_excludes_below_min_df():
    docs = [["seen", "common"]] * 19 + [["common"]] * 11
    vocab = build_vocabulary(docs, min_df=20)
    assert "seen" not in vocab.index
    assert vocab.doc_freq["common"] == 30


def test_vocabulary_excludes_stopwords():
    docs = [["the", "dog"]] * 25
    vocab = build_vocabulary(docs, stopwords={"the"}, min_df=20)
    assert list(vocab.terms) == ["dog"]


def test_vocabulary_order_df_desc_then_lexicographic():
    docs = [["b", "a", "z"]] * 3 + [["z"]] * 2
    vocab = build_vocabulary(docs, min_df=1)
    assert list(vocab.terms) == ["z", "a", "b"]


def test_vocabulary_empty_is_fatal():
    with pytest.raises(ValueError):
        build_vocabulary([["rare"]], min_df=20)


def test_vocabulary_roundtrip(tmp_path):
    vocab = build_vocabulary([["b", "a"]] * 4, min_df=1)
    path = tmp_path / "vocab.tsv"
    vocab.save(path)
    loaded = Vocabulary.load(path)
    assert loaded.terms == vocab.terms
    assert loaded.doc_freq == dict(vocab.doc_freq)


# --- vectorization ------------------------------------------------------------------

@pytest.fixture
def vocab():
    return build_vocabulary([["dog", "cat"]] * 3, min_df=1)


def test_vectorize_counts(vocab):
    bow = vectorize(["dog", "dog", "cat"], vocab)
    assert {vocab.terms[m]: c for m, c in bow.counts.items()} == {"dog": 2, "cat": 1}
    assert bow.total == 3


def test_vectorize_oov_ignored_and_empty_flagged(vocab):
    bow = vectorize(["lizard", "bird"], vocab)
    assert bow.is_empty


def test_vectorize_order_invariance(vocab):
    assert vectorize(["dog", "cat", "dog"], vocab) == vectorize(["cat", "dog", "dog"], vocab)


@given(st.lists(st.sampled_from(["dog", "cat", "oov"]), max_size=30), st.randoms())
def test_vectorize_permutation_invariance_property(tokens, rng):
    vocab = build_vocabulary([["dog", "cat"]], min_df=1)
    shuffled = list(tokens)
    rng.shuffle(shuffled)
    assert vectorize(tokens, vocab) == vectorize(shuffled, vocab)
    in_vocab = sum(1 for t in tokens if t != "oov")
    assert vectorize(tokens, vocab).total == in_vocab
