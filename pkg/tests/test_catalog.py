"""Mention parsing, normalization, and the frequency ranking."""

import io
import random

import pytest

from keyword_atlas.catalog import (
    MentionRecord,
    load_aliases,
    normalize_keyword,
    parse_mentions,
    rank_by_mentions,
    read_keywords_csv,
    tally_mentions,
    write_keywords_csv,
)
from keyword_atlas.errors import NormalizationError, ParseError


def test_normalize_lowercases_and_collapses_whitespace():
    assert normalize_keyword("  Complex   Systems ") == "complex systems"
    assert normalize_keyword("CHAOS") == "chaos"


def test_normalize_empty_raises():
    with pytest.raises(NormalizationError):
        normalize_keyword("   ")


def test_normalize_applies_aliases():
    aliases = {"abm": "agent-based modeling"}
    assert normalize_keyword("ABM", aliases) == "agent-based modeling"
    assert normalize_keyword("chaos", aliases) == "chaos"


def test_normalize_is_idempotent():
    aliases = load_aliases(io.StringIO("alias,canonical\nabm,agent-based modeling\n"))
    for raw in ["ABM", "  Agent-Based   Modeling ", "chaos"]:
        once = normalize_keyword(raw, aliases)
        assert normalize_keyword(once, aliases) == once


def test_alias_chain_rejected():
    text = "alias,canonical\na,b\nb,c\n"
    with pytest.raises(ParseError, match="itself an alias"):
        load_aliases(io.StringIO(text))


def test_duplicate_alias_rejected():
    text = "alias,canonical\nabm,agent-based modeling\nabm,something else\n"
    with pytest.raises(ParseError, match="duplicate alias"):
        load_aliases(io.StringIO(text))


def test_parse_mentions_reads_rows_in_order():
    text = "keyword,source,origin\nchaos,books,book-1\nChaos,social_media,post-9\n"
    records = parse_mentions(io.StringIO(text))
    assert [r.raw_text for r in records] == ["chaos", "Chaos"]
    assert records[1].source == "social_media"


def test_parse_mentions_unknown_source_names_line():
    text = "keyword,source,origin\nchaos,books,b\nchaos,x,b\n"
    with pytest.raises(ParseError, match="line 3"):
        parse_mentions(io.StringIO(text))


def test_parse_mentions_bad_header():
    with pytest.raises(ParseError, match="line 1"):
        parse_mentions(io.StringIO("kw,src,origin\nchaos,books,b\n"))


def test_mention_record_rejects_unknown_source():
    with pytest.raises(ParseError):
        MentionRecord(raw_text="chaos", source="magazines")


def test_tally_merges_case_variants():
    records = [
        MentionRecord(raw_text=t, source="books") for t in ["Chaos", "chaos", "CHAOS"]
    ]
    keywords, ranking = tally_mentions(records, threshold=1)
    assert len(keywords) == 1
    assert keywords[0].canonical == "chaos"
    assert keywords[0].mention_count == 3
    assert len(ranking) == 1


def test_tally_threshold_filters_ranking_but_keeps_keyword_set():
    records = [
        MentionRecord(raw_text="a", source="books"),
        MentionRecord(raw_text="a", source="books"),
        MentionRecord(raw_text="b", source="books"),
    ]
    keywords, ranking = tally_mentions(records, threshold=2)
    assert {k.canonical for k in keywords} == {"a", "b"}
    assert [kid for kid, _ in ranking.entries] == [
        next(k.id for k in keywords if k.canonical == "a")
    ]


def test_tally_counts_sum_to_record_count():
    records = [
        MentionRecord(raw_text=w, source="books")
        for w in ["a", "b", "a", "c", "b", "a"]
    ]
    keywords, _ = tally_mentions(records, threshold=1)
    assert sum(k.mention_count for k in keywords) == len(records)


def test_tally_is_permutation_invariant():
    base = [
        MentionRecord(raw_text=w, source="books")
        for w in ["a", "b", "a", "c", "b", "a", "d", "d", "d"]
    ]
    keywords, ranking = tally_mentions(base, threshold=2)
    shuffled = base[:]
    random.Random(9).shuffle(shuffled)
    keywords2, ranking2 = tally_mentions(shuffled, threshold=2)
    assert keywords == keywords2
    assert ranking == ranking2


def test_keyword_ids_assigned_in_label_order():
    records = [
        MentionRecord(raw_text=w, source="books") for w in ["zebra", "apple", "mango"]
    ]
    keywords, _ = tally_mentions(records, threshold=0)
    assert [k.canonical for k in keywords] == ["apple", "mango", "zebra"]
    assert [k.id for k in keywords] == [0, 1, 2]


def test_ranking_sorted_by_count_then_label():
    records = []
    for word, count in [("b", 3), ("a", 3), ("c", 5)]:
        records += [MentionRecord(raw_text=word, source="books")] * count
    keywords, ranking = tally_mentions(records, threshold=3)
    labels = {k.id: k.canonical for k in keywords}
    assert [labels[kid] for kid, _ in ranking.entries] == ["c", "a", "b"]


def test_raising_threshold_never_adds_entries():
    records = []
    for word, count in [("a", 1), ("b", 2), ("c", 3), ("d", 5)]:
        records += [MentionRecord(raw_text=word, source="books")] * count
    keywords, _ = tally_mentions(records, threshold=0)
    previous = None
    for threshold in [0, 1, 2, 3, 4, 5, 6]:
        ranking = rank_by_mentions(keywords, threshold)
        ids = {kid for kid, _ in ranking.entries}
        if previous is not None:
            assert ids <= previous
        previous = ids


def test_keywords_csv_round_trip(tmp_path):
    records = [
        MentionRecord(raw_text=w, source=s)
        for w, s in [("a", "books"), ("a", "social_media"), ("b", "online_resources")]
    ]
    keywords, _ = tally_mentions(records, aliases={"alpha": "a"}, threshold=0)
    path = tmp_path / "keywords.csv"
    write_keywords_csv(keywords, path)
    assert read_keywords_csv(path) == keywords
