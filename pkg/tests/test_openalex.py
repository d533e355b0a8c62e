"""Query building, the hit cache, rate limiting, retries, and harvesting."""

import json

import pytest

from conftest import FakeTransport
from keyword_atlas.catalog import Keyword
from keyword_atlas.errors import (
    ContractError,
    QueryBuildError,
    QueryError,
    ReplayError,
    TransportError,
)
from keyword_atlas.openalex import (
    TOTAL_QUERY,
    HitRecord,
    HitStore,
    OpenAlexClient,
    RateBudget,
    RateLimiter,
    build_query,
    context_query,
    harvest,
    plan_queries,
    validate_narrowing,
)

CONTEXT = ("complex systems", "complexity science")


def make_client(store=None, **kwargs):
    kwargs.setdefault("mode", "live")
    kwargs.setdefault("sleep", lambda s: None)
    kwargs.setdefault("clock", lambda: 0.0)
    return OpenAlexClient(store if store is not None else HitStore(), **kwargs)


# --- query rendering ---


def test_single_keyword_renders_quoted():
    assert build_query("networks").render() == '"networks"'


def test_pair_renders_and_joined():
    assert build_query(("chaos", "emergence")).render() == '"chaos" AND "emergence"'


def test_context_clause_is_parenthesized_or():
    assert context_query(CONTEXT).render() == '("complex systems" OR "complexity science")'


def test_keyword_with_context():
    expr = build_query("chaos", context=CONTEXT)
    assert expr.render() == '"chaos" AND ("complex systems" OR "complexity science")'


def test_pair_with_context():
    expr = build_query(("chaos", "emergence"), context=CONTEXT)
    assert (
        expr.render()
        == '"chaos" AND "emergence" AND ("complex systems" OR "complexity science")'
    )


def test_total_query_renders_empty():
    assert TOTAL_QUERY.render() == ""


def test_empty_phrase_rejected():
    with pytest.raises(QueryBuildError):
        build_query("  ")
    with pytest.raises(QueryBuildError):
        build_query("ok", context=("", "also ok"))


def test_embedded_quote_rejected():
    with pytest.raises(QueryBuildError):
        build_query('say "hi"')


# --- hit store ---


def test_store_round_trip(tmp_path):
    store = HitStore()
    store.put(HitRecord(query='"chaos"', count=42, fetched_at="2025-11-05T09:00:00Z"))
    store.put(HitRecord(query="", count=7, fetched_at="2025-11-05T09:00:01Z"))
    path = tmp_path / "hits.json"
    store.save(path)
    assert HitStore.load(path) == store


def test_store_count_raises_on_miss():
    with pytest.raises(ReplayError, match="chaos"):
        HitStore().count('"chaos"')


def test_store_negative_count_rejected():
    with pytest.raises(ValueError):
        HitRecord(query='"x"', count=-1, fetched_at="2025-11-05T09:00:00Z")


# --- client ---


def test_live_fetch_parses_meta_count():
    transport = FakeTransport({'"chaos"': 42})
    client = make_client(transport=transport)
    record = client.count_works(build_query("chaos"))
    assert record.count == 42
    assert record.source == "network"
    assert client.requests_issued == 1


def test_second_call_served_from_cache():
    transport = FakeTransport({'"chaos"': 42})
    client = make_client(transport=transport)
    client.count_works(build_query("chaos"))
    record = client.count_works(build_query("chaos"))
    assert record.source == "cache"
    assert client.requests_issued == 1


def test_offline_miss_raises_replay_error():
    client = make_client(mode="offline")
    with pytest.raises(ReplayError, match="chaos"):
        client.count_works(build_query("chaos"))


def test_offline_never_touches_transport():
    transport = FakeTransport()
    store = HitStore()
    store.put(HitRecord(query='"chaos"', count=5, fetched_at="2025-11-05T09:00:00Z"))
    client = make_client(store, mode="offline", transport=transport)
    assert client.count_works(build_query("chaos")).count == 5
    assert transport.calls == []


def test_request_params_include_page_size_and_mailto():
    transport = FakeTransport({'"chaos"': 1})
    client = make_client(transport=transport, mailto="team@example.org")
    client.count_works(build_query("chaos"))
    _, params = transport.calls[0]
    assert params["per-page"] == "1"
    assert params["mailto"] == "team@example.org"
    assert params["search"] == '"chaos"'


def test_total_query_sends_no_search_param():
    transport = FakeTransport({"": 1000})
    client = make_client(transport=transport)
    client.count_works(TOTAL_QUERY)
    _, params = transport.calls[0]
    assert "search" not in params


def test_retry_on_429_then_success():
    body = json.dumps({"meta": {"count": 9}})
    transport = FakeTransport({'"chaos"': [(429, ""), (200, body)]})
    sleeps = []
    client = make_client(
        transport=transport,
        sleep=sleeps.append,
        budget=RateBudget(requests_per_second=0.0),
    )
    assert client.count_works(build_query("chaos")).count == 9
    assert client.requests_issued == 2
    assert len(sleeps) == 1 and 1.0 <= sleeps[0] < 1.1  # jittered backoff base


def test_backoff_delays_grow_exponentially():
    transport = FakeTransport({'"chaos"': [(500, "")]})
    sleeps = []
    client = make_client(
        transport=transport,
        sleep=sleeps.append,
        budget=RateBudget(requests_per_second=0.0, jitter=0.0),
    )
    with pytest.raises(TransportError, match="retries exhausted"):
        client.count_works(build_query("chaos"))
    assert sleeps == [1.0, 2.0, 4.0, 8.0]  # base 1, factor 2, 5 attempts


def test_client_4xx_is_query_error_not_retried():
    transport = FakeTransport({'"chaos"': [(404, "")]})
    client = make_client(transport=transport)
    with pytest.raises(QueryError, match="404"):
        client.count_works(build_query("chaos"))
    assert client.requests_issued == 1


def test_malformed_body_is_query_error():
    transport = FakeTransport({'"chaos"': [(200, "not json")]})
    client = make_client(transport=transport)
    with pytest.raises(QueryError, match="malformed"):
        client.count_works(build_query("chaos"))


def test_rate_limiter_paces_requests():
    now = [0.0]
    sleeps = []

    def clock():
        return now[0]

    def sleep(seconds):
        sleeps.append(seconds)
        now[0] += seconds

    limiter = RateLimiter(5.0, clock=clock, sleep=sleep)
    for _ in range(6):
        limiter.acquire()
    # 6 acquisitions at 5/s fit in one second: five 0.2 s gaps
    assert sleeps == pytest.approx([0.2, 0.2, 0.2, 0.2, 0.2])


# --- harvest ---


def kw(i, label):
    return Keyword(id=i, canonical=label, mention_count=3)


def test_plan_queries_two_keywords_one_pair_is_seven():
    plan = plan_queries(["a", "b"], [("a", "b")], CONTEXT)
    assert len(plan) == 7
    rendered = [q.render() for q in plan]
    assert rendered[0] == ""  # total catalogue
    assert rendered[1] == '("complex systems" OR "complexity science")'
    assert '"a" AND "b"' in rendered


def test_harvest_fills_store_and_is_resumable():
    transport = FakeTransport(default_count=5)
    client = make_client(transport=transport)
    keywords = [kw(0, "a"), kw(1, "b")]
    report = harvest(client, keywords, [(0, 1)], CONTEXT)
    assert report.issued == 7
    assert report.ok
    again = harvest(client, keywords, [(0, 1)], CONTEXT)
    assert again.issued == 0
    assert again.from_cache == 7
    assert client.requests_issued == 7


def test_harvest_empty_inputs_fetches_base_queries():
    transport = FakeTransport(default_count=5)
    client = make_client(transport=transport)
    report = harvest(client, [], [], CONTEXT)
    assert report.issued == 2
    assert "" in client.store
    assert context_query(CONTEXT).render() in client.store


def test_harvest_unknown_pair_id_rejected():
    client = make_client(transport=FakeTransport(default_count=1))
    with pytest.raises(ContractError):
        harvest(client, [kw(0, "a")], [(0, 9)], CONTEXT)


def test_harvest_records_failures_and_continues():
    transport = FakeTransport({'"a"': [(404, "")]}, default_count=5)
    client = make_client(transport=transport)
    report = harvest(client, [kw(0, "a"), kw(1, "b")], [], CONTEXT)
    assert [q for q, _ in report.failures] == ['"a"']
    assert not report.ok
    # the other five queries still landed
    assert len(client.store) == 5


def test_harvest_fail_fast_propagates():
    transport = FakeTransport({'"a"': [(404, "")]}, default_count=5)
    client = make_client(transport=transport)
    with pytest.raises(QueryError):
        harvest(client, [kw(0, "a"), kw(1, "b")], [], CONTEXT, fail_fast=True)


def test_harvest_respects_request_ceiling():
    transport = FakeTransport(default_count=5)
    client = make_client(transport=transport, budget=RateBudget(max_requests=3))
    report = harvest(client, [kw(0, "a"), kw(1, "b")], [(0, 1)], CONTEXT)
    assert client.requests_issued == 3
    assert len(report.not_attempted) == 4


def test_validate_narrowing_flags_violations():
    store = HitStore()
    stamp = "2025-11-05T09:00:00Z"
    store.put(HitRecord(query='"a"', count=10, fetched_at=stamp))
    store.put(HitRecord(query='"b"', count=20, fetched_at=stamp))
    store.put(HitRecord(query='"a" AND "b"', count=15, fetched_at=stamp))
    warnings = []
    assert validate_narrowing(store, warnings.append) == 1
    assert "exceeds" in warnings[0]


def test_validate_narrowing_passes_consistent_store():
    store = HitStore()
    stamp = "2025-11-05T09:00:00Z"
    store.put(HitRecord(query='"a"', count=10, fetched_at=stamp))
    store.put(HitRecord(query='"a" AND "b"', count=3, fetched_at=stamp))
    assert validate_narrowing(store, lambda _: None) == 0
