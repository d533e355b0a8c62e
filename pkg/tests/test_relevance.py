"""Visibility boost, relevance scores, and the induced ranking."""

import numpy as np
import pytest

from keyword_atlas.catalog import Keyword
from keyword_atlas.errors import ConfigError
from keyword_atlas.openalex import TOTAL_QUERY, HitRecord, HitStore, build_query, context_query
from keyword_atlas.relevance import (
    compute_scores,
    get_boost_function,
    rank_by_relevance,
    relevance_score,
    visibility_boost,
)

CONTEXT = ("complex systems", "complexity science")
STAMP = "2025-11-05T09:00:00Z"


def test_boost_worked_example():
    assert visibility_boost(1000, 50, 100_000, 10_000_000) == pytest.approx(5.0)


def test_boost_of_independent_keyword_is_one():
    # co-hit share equals unconditional share
    assert visibility_boost(1000, 10, 100_000, 10_000_000) == pytest.approx(1.0)


def test_boost_zero_hits_is_zero():
    assert visibility_boost(0, 0, 100, 1000) == 0.0


def test_boost_requires_positive_context_counts():
    with pytest.raises(ConfigError):
        visibility_boost(10, 1, 0, 1000)
    with pytest.raises(ConfigError):
        visibility_boost(10, 1, 100, 0)


def test_score_is_hits_times_boost():
    assert relevance_score(1000, 5.0) == 5000.0
    assert relevance_score(0, 3.0) == 0.0
    assert relevance_score(777, 1.0) == 777.0


def test_unknown_boost_function_rejected():
    with pytest.raises(ConfigError, match="unknown boost function"):
        get_boost_function("tf-idf")


def test_boost_scale_invariance():
    # scaling all counts by the same factor leaves the boost unchanged
    base = visibility_boost(1000, 50, 100_000, 10_000_000)
    scaled = visibility_boost(3000, 150, 300_000, 30_000_000)
    assert scaled == pytest.approx(base, rel=1e-12)


def make_store(counts, h_c=100_000, h_all=10_000_000):
    """counts: label -> (h_k, h_kc)."""
    store = HitStore()
    store.put(HitRecord(query=TOTAL_QUERY.render(), count=h_all, fetched_at=STAMP))
    store.put(HitRecord(query=context_query(CONTEXT).render(), count=h_c, fetched_at=STAMP))
    for label, (h_k, h_kc) in counts.items():
        store.put(HitRecord(query=build_query(label).render(), count=h_k, fetched_at=STAMP))
        store.put(
            HitRecord(
                query=build_query(label, context=CONTEXT).render(),
                count=h_kc,
                fetched_at=STAMP,
            )
        )
    return store


def keywords_for(labels):
    return [Keyword(id=i, canonical=label) for i, label in enumerate(sorted(labels))]


def test_compute_scores_in_id_order():
    counts = {"b": (1000, 50), "a": (2000, 20)}
    store = make_store(counts)
    scores = compute_scores(keywords_for(counts), store, CONTEXT)
    assert [s.keyword_id for s in scores] == [0, 1]
    assert scores[0].h_k == 2000  # "a" has the lower id
    assert scores[0].score == pytest.approx(20 * (10_000_000 / 100_000))


def test_compute_scores_warns_when_co_hits_exceed_hits():
    store = make_store({"a": (10, 25)})
    with pytest.warns(UserWarning, match="exceed"):
        compute_scores(keywords_for(["a"]), store, CONTEXT)


def test_ranking_sorted_desc_with_label_ties():
    counts = {"a": (100, 3), "b": (200, 3), "c": (100, 9)}
    store = make_store(counts)
    keywords = keywords_for(counts)
    scores = compute_scores(keywords, store, CONTEXT)
    labels = {k.id: k.canonical for k in keywords}
    ranking = rank_by_relevance(scores, labels)
    ordered = [labels[kid] for kid, _ in ranking.entries]
    assert ordered == ["c", "a", "b"]  # 9 beats 3; a/b tie broken by label


def test_ranking_truncates_to_top_n():
    counts = {f"k{i:02d}": (100 + i, i + 1) for i in range(10)}
    store = make_store(counts)
    keywords = keywords_for(counts)
    scores = compute_scores(keywords, store, CONTEXT)
    labels = {k.id: k.canonical for k in keywords}
    assert len(rank_by_relevance(scores, labels, top_n=4)) == 4


def test_lift_ranking_collapses_to_co_hit_ranking():
    # under the lift boost, score = h_kc * (h_all / h_c); the ranking must
    # equal ranking by h_kc with the same tie rule
    rng = np.random.default_rng(12345)
    for _ in range(50):
        n = int(rng.integers(5, 40))
        labels = [f"kw{i:02d}" for i in range(n)]
        counts = {}
        for label in labels:
            h_k = int(rng.integers(0, 1_000_000))
            h_kc = int(rng.integers(0, h_k + 1)) if h_k else 0
            counts[label] = (h_k, h_kc)
        h_c = int(rng.integers(1, 1_000_000))
        h_all = int(rng.integers(h_c, 100_000_000))
        store = make_store(counts, h_c=h_c, h_all=h_all)
        keywords = keywords_for(counts)
        scores = compute_scores(keywords, store, CONTEXT)
        label_of = {k.id: k.canonical for k in keywords}
        by_score = [label_of[kid] for kid, _ in rank_by_relevance(scores, label_of).entries]
        by_co_hits = [
            label
            for label, _ in sorted(counts.items(), key=lambda kv: (-kv[1][1], kv[0]))
        ]
        assert by_score == by_co_hits
