from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from threadtopics.topic_model import TopicModel
from threadtopics.topic_naming import (
    OTHER_NAME,
    Decision,
    NameMap,
    NamedTopics,
    TopicPair,
    aggregate_posterior,
    body_preview,
    load_meta_categories,
    load_name_map,
    merge_topics,
    naming_bank,
    packaged_fixture,
    resolve_names,
    save_name_map,
    top_topics,
    topic_pair,
)


@dataclass
class Doc:
    post_id: str
    title: str
    body: str


def synthetic_model(K, docs_per_cluster=7, M=40, seed=0):
    """Hand-built model: cluster k dominates docs k*dpc..(k+1)*dpc."""
    rng = np.random.Generator(np.random.PCG64(seed))
    phi = rng.dirichlet([0.5] * M, size=K)
    rows = []
    for k in range(K):
        for i in range(docs_per_cluster):
            theta = np.full(K, 0.2 / (K - 1))
            theta[k] = 0.8 - 0.001 * i
            rows.append(theta / theta.sum())
    theta = np.asarray(rows)
    model = TopicModel(K=K, M=M, phi=phi, theta_train=theta, alpha=0.1,
                       beta=0.01, seed=seed, iterations=1,
                       terms=tuple(f"w{m}" for m in range(M)))
    docs = [Doc(f"p{i}", f"title {i}", f"body of post {i} " * 30)
            for i in range(theta.shape[0])]
    return model, docs


# --- naming bank --------------------------------------------------------------

def test_naming_bank_one_question_per_cluster():
    model, docs = synthetic_model(K=70, docs_per_cluster=7)
    bank = naming_bank(model, docs, seed=1)
    assert len(bank) == 70
    q = bank[0]
    assert len(q.keywords) == 10
    assert len(q.example_posts) == 6
    assert sum(p.selection == "TOP" for p in q.example_posts) == 3
    assert sum(p.selection == "RANDOM" for p in q.example_posts) == 3
    assert not q.flagged


def test_naming_bank_small_cluster_flagged():
    model, docs = synthetic_model(K=4, docs_per_cluster=4)
    bank = naming_bank(model, docs, seed=1)
    assert all(len(q.example_posts) == 4 and q.flagged for q in bank)


def test_naming_bank_deterministic():
    model, docs = synthetic_model(K=5)
    assert naming_bank(model, docs, seed=9) == naming_bank(model, docs, seed=9)


def test_naming_bank_top_posts_have_highest_posterior():
    model, docs = synthetic_model(K=3, docs_per_cluster=10)
    bank = naming_bank(model, docs, seed=2)
    # docs are laid out cluster-major with decreasing posterior inside a cluster
    q = bank[1]  # cluster 2 -> docs p10..p19, top three are p10, p11, p12
    tops = [p.post_id for p in q.example_posts if p.selection == "TOP"]
    assert tops == ["p10", "p11", "p12"]


def test_naming_bank_low_posterior_mode():
    model, docs = synthetic_model(K=3, docs_per_cluster=10)
    bank = naming_bank(model, docs, seed=2, random_source="low_posterior")
    q = bank[0]
    rands = [p.post_id for p in q.example_posts if p.selection == "RANDOM"]
    assert rands == ["p9", "p8", "p7"]  # lowest posteriors of cluster 1


def test_body_preview_truncates_at_100_words():
    body = " ".join(f"w{i}" for i in range(130))
    preview = body_preview(body)
    assert preview.endswith(" [...]")
    assert len(preview.split()) == 101  # 100 words plus the marker
    short = "just a few words"
    assert body_preview(short) == short


# --- name resolution ------------------------------------------------------------

def write_decisions(tmp_path, rows):
    path = tmp_path / "decisions.tsv"
    path.write_text("".join(f"{cid}\t{name}\t{dec}\n" for cid, name, dec in rows))
    return path


def test_resolve_names_from_decisions_file(tmp_path):
    path = write_decisions(tmp_path, [
        (1, "shopping", "UNANIMOUS"),
        (2, "race", "WORDING"),
        (3, "other", "OTHER"),
    ])
    answers = {
        1: ["shopping", "shopping", "shopping"],
        2: ["race", "racism", "race"],
        3: ["entertain", "relationships", "army"],
    }
    name_map = resolve_names(answers, path)
    assert name_map.entries == {1: "shopping", 2: "race", 3: "other"}
    assert name_map.decision[1] == Decision.UNANIMOUS
    assert name_map.decision[3] == Decision.OTHER


def test_resolve_names_missing_cluster_fatal(tmp_path):
    path = write_decisions(tmp_path, [(1, "pets", "UNANIMOUS")])
    with pytest.raises(ValueError):
        resolve_names({1: ["a"] * 3, 2: ["b"] * 3}, path)


def test_resolve_names_requires_three_answers(tmp_path):
    path = write_decisions(tmp_path, [(1, "pets", "UNANIMOUS")])
    with pytest.raises(ValueError):
        resolve_names({1: ["pets", "pets"]}, path)


def test_name_map_other_consistency():
    with pytest.raises(ValueError):
        NameMap(entries={1: "food"}, decision={1: Decision.OTHER})
    with pytest.raises(ValueError):
        NameMap(entries={1: "other"}, decision={1: Decision.WORDING})
    with pytest.raises(ValueError):
        NameMap(entries={1: ""}, decision={1: Decision.WORDING})


def test_name_map_roundtrip(tmp_path):
    nm = NameMap(entries={1: "pets", 2: "other"},
                 decision={1: Decision.UNANIMOUS, 2: Decision.OTHER})
    path = tmp_path / "map.tsv"
    save_name_map(nm, path)
    loaded = load_name_map(path)
    assert loaded.entries == nm.entries
    assert loaded.decision == nm.decision


# --- merging ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def fixture_merge():
    model, _ = synthetic_model(K=70, docs_per_cluster=7, seed=4)
    name_map = load_name_map(packaged_fixture("cluster_name_map.tsv"))
    meta = load_meta_categories(packaged_fixture("meta_categories.tsv"))
    return model, name_map, merge_topics(model, name_map, meta)


def test_bundled_fixture_merges_to_47_plus_other(fixture_merge):
    _, _, named = fixture_merge
    assert len(named.names) == 47
    assert named.all_names[-1] == OTHER_NAME
    assert named.cluster_members[OTHER_NAME] == frozenset({44, 45, 46})
    assert len(named.cluster_members["family"]) == 5  # most-merged topic


def test_merge_members_partition_clusters(fixture_merge):
    _, _, named = fixture_merge
    seen = set()
    for members in named.cluster_members.values():
        assert seen.isdisjoint(members)
        seen |= members
    assert seen == set(range(1, 71))


def test_merge_counts_use_top1_assignment(fixture_merge):
    model, name_map, named = fixture_merge
    # synthetic model assigns exactly 7 docs per cluster
    for name, members in named.cluster_members.items():
        assert named.topic_counts[name] == 7 * len(members)


def test_merge_requires_meta_for_every_topic():
    model, _ = synthetic_model(K=2)
    nm = NameMap(entries={1: "pets", 2: "food"},
                 decision={1: Decision.UNANIMOUS, 2: Decision.UNANIMOUS})
    with pytest.raises(ValueError):
        merge_topics(model, nm, {"pets": "identities"})  # food missing


def test_merge_all_distinct_names_keeps_cluster_count():
    model, _ = synthetic_model(K=4)
    nm = NameMap(entries={1: "a", 2: "b", 3: "c", 4: "d"},
                 decision={i: Decision.UNANIMOUS for i in range(1, 5)})
    named = merge_topics(model, nm, {n: "things" for n in "abcd"})
    assert len(named.names) == model.K


# --- posterior aggregation ---------------------------------------------------------

@pytest.fixture
def named_small():
    return NamedTopics(
        names=("family", "money"),
        meta_category={"family": "identities", "money": "things"},
        cluster_members={"family": frozenset({1, 2}), "money": frozenset({3}),
                         OTHER_NAME: frozenset({4})},
        topic_counts={"family": 0, "money": 0, OTHER_NAME: 0},
        K=4,
    )


def test_aggregate_sums_member_clusters(named_small):
    theta = np.array([0.2, 0.3, 0.25, 0.25])
    agg = aggregate_posterior(theta, named_small)
    assert agg == pytest.approx([0.5, 0.25, 0.25])


def test_aggregate_identity_map():
    named = NamedTopics(
        names=("a", "b"), meta_category={"a": "things", "b": "things"},
        cluster_members={"a": frozenset({1}), "b": frozenset({2})},
        topic_counts={"a": 0, "b": 0}, K=2,
    )
    theta = np.array([0.7, 0.3])
    assert aggregate_posterior(theta, named) == pytest.approx([0.7, 0.3])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_aggregate_preserves_mass_property(seed):
    named = NamedTopics(
        names=("x", "y", "z"),
        meta_category={n: "things" for n in "xyz"},
        cluster_members={"x": frozenset({1, 4}), "y": frozenset({2}),
                         "z": frozenset({3, 5}), OTHER_NAME: frozenset({6})},
        topic_counts={n: 0 for n in ("x", "y", "z", OTHER_NAME)},
        K=6,
    )
    theta = np.random.Generator(np.random.PCG64(seed)).dirichlet([0.4] * 6)
    assert abs(aggregate_posterior(theta, named).sum() - 1.0) <= 1e-9


# --- ranking and pairs -----------------------------------------------------------------

def test_top_topics_excludes_other_and_reports_gap(named_small):
    agg = np.array([0.4, 0.35, 0.25])  # family, money, other
    ranked = top_topics(agg, named_small, 2)
    assert [n for n, _ in ranked.items] == ["family", "money"]
    assert ranked.gap == pytest.approx(0.05)


def test_top_topics_other_never_ranks_even_with_max_mass(named_small):
    agg = np.array([0.2, 0.3, 0.5])
    ranked = top_topics(agg, named_small, 2)
    assert [n for n, _ in ranked.items] == ["money", "family"]


def test_topic_pair_canonical_order(named_small):
    pair = topic_pair(np.array([0.3, 0.5, 0.2]), named_small)
    assert (pair.a, pair.b) == ("family", "money")
    assert TopicPair("money", "family") == pair


def test_topic_pair_symmetric_under_top2_swap(named_small):
    p1 = topic_pair(np.array([0.45, 0.35, 0.2]), named_small)
    p2 = topic_pair(np.array([0.35, 0.45, 0.2]), named_small)
    assert p1 == p2


def test_topic_pair_requires_two_positive(named_small):
    with pytest.raises(ValueError):
        topic_pair(np.array([1.0, 0.0, 0.0]), named_small)


def test_topic_pair_never_contains_other():
    with pytest.raises(ValueError):
        TopicPair("family", OTHER_NAME)
    with pytest.raises(ValueError):
        TopicPair("family", "family")
