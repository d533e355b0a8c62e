"""Hit-count harvesting against the OpenAlex works catalogue.

Only the result-count metadata of boolean phrase searches is ever read; no
work records are downloaded.  Counts are cached in a JSON file so that the
whole pipeline can be replayed offline and byte-identically.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import requests

from .errors import ContractError, QueryBuildError, QueryError, ReplayError, TransportError

DEFAULT_BASE_URL = "https://api.openalex.org/works"

# A transport maps (url, params) to (status code, response body).
Transport = Callable[[str, Mapping[str, str]], tuple[int, str]]


@dataclass(frozen=True)
class QueryExpression:
    """A conjunction of quoted phrases, optionally ending in an OR'd context pair.

    Rendering is byte-deterministic: fixed quoting, single spaces, and a fixed
    parenthesization of the context clause.
    """

    clauses: tuple[str, ...]
    context: tuple[str, str] | None = None

    def render(self) -> str:
        parts = [f'"{c}"' for c in self.clauses]
        if self.context is not None:
            a, b = self.context
            parts.append(f'("{a}" OR "{b}")')
        return " AND ".join(parts)


#: Matches the whole catalogue (a request with no search filter at all).
TOTAL_QUERY = QueryExpression(clauses=())


def _check_phrase(phrase: str) -> str:
    if not phrase or not phrase.strip():
        raise QueryBuildError("empty search phrase")
    if '"' in phrase:
        raise QueryBuildError(f"phrase may not contain double quotes: {phrase!r}")
    return phrase


def build_query(
    primary: str | Sequence[str],
    context: tuple[str, str] | None = None,
) -> QueryExpression:
    """Build a query for one keyword or a keyword pair, with optional context.

    ``primary`` is a single phrase or a pair of phrases (AND-joined); the
    context pair, when given, is appended as a parenthesized OR clause.
    """
    if isinstance(primary, str):
        clauses = (_check_phrase(primary),)
    else:
        clauses = tuple(_check_phrase(p) for p in primary)
        if not clauses:
            raise QueryBuildError("at least one phrase required")
    if context is not None:
        context = (_check_phrase(context[0]), _check_phrase(context[1]))
    return QueryExpression(clauses=clauses, context=context)


def context_query(context: tuple[str, str]) -> QueryExpression:
    """The context disjunction on its own, e.g. ("complex systems" OR ...)."""
    return QueryExpression(clauses=(), context=(_check_phrase(context[0]), _check_phrase(context[1])))


@dataclass(frozen=True)
class HitRecord:
    """A cached work count for one rendered query."""

    query: str
    count: int
    fetched_at: str  # UTC ISO-8601
    source: str = "network"  # "network" | "cache"

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be non-negative")


class HitStore:
    """Persistent map from rendered query text to its hit record.

    Equality and persistence cover the durable fields (count, fetched_at);
    whether a record arrived from the network or the cache is runtime-only.
    """

    def __init__(self, entries: Mapping[str, HitRecord] | None = None):
        self.entries: dict[str, HitRecord] = dict(entries or {})

    def get(self, query_text: str) -> HitRecord | None:
        return self.entries.get(query_text)

    def put(self, record: HitRecord) -> None:
        self.entries[record.query] = record

    def count(self, query_text: str) -> int:
        """Look up a count, raising ReplayError when the query is absent."""
        record = self.entries.get(query_text)
        if record is None:
            raise ReplayError(f"query not in hit cache: {query_text!r}")
        return record.count

    def __contains__(self, query_text: str) -> bool:
        return query_text in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, HitStore):
            return NotImplemented
        return {q: (r.count, r.fetched_at) for q, r in self.entries.items()} == {
            q: (r.count, r.fetched_at) for q, r in other.entries.items()
        }

    def save(self, path: str | Path) -> None:
        payload = {
            q: {"count": r.count, "fetched_at": r.fetched_at}
            for q, r in self.entries.items()
        }
        text = json.dumps(payload, sort_keys=True, indent=1, ensure_ascii=False)
        Path(path).write_text(text + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "HitStore":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = {
            q: HitRecord(query=q, count=v["count"], fetched_at=v["fetched_at"], source="cache")
            for q, v in payload.items()
        }
        return cls(entries)


@dataclass(frozen=True)
class RateBudget:
    """Politeness limits for one harvest run."""

    requests_per_second: float = 5.0
    max_requests: int | None = None
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    max_attempts: int = 5
    jitter: float = 0.1


class RateLimiter:
    """Paces request issuance to at most requests_per_second."""

    def __init__(
        self,
        requests_per_second: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._interval = 1.0 / requests_per_second if requests_per_second > 0 else 0.0
        self._clock = clock
        self._sleep = sleep
        self._next_allowed = float("-inf")

    def acquire(self) -> None:
        if self._interval <= 0:
            return
        now = self._clock()
        if now < self._next_allowed:
            self._sleep(self._next_allowed - now)
            now = self._next_allowed
        self._next_allowed = max(now, self._next_allowed) + self._interval


def requests_transport(timeout: float = 30.0) -> Transport:
    """Default transport backed by the requests library."""

    session = requests.Session()

    def send(url: str, params: Mapping[str, str]) -> tuple[int, str]:
        try:
            response = session.get(url, params=dict(params), timeout=timeout)
        except requests.RequestException as exc:
            raise TransportError(f"request failed: {exc}") from exc
        return response.status_code, response.text

    return send


class OpenAlexClient:
    """Issues work-count queries with caching, pacing, retries, and replay.

    In ``offline`` mode no transport is touched; every query must already be
    in the store.  In ``live`` mode, cache misses trigger one works request
    with the smallest page size, retried with jittered exponential backoff on
    429 and 5xx responses.
    """

    def __init__(
        self,
        store: HitStore,
        mode: str = "offline",
        *,
        transport: Transport | None = None,
        mailto: str | None = None,
        budget: RateBudget | None = None,
        base_url: str = DEFAULT_BASE_URL,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
        utc_now: Callable[[], datetime] | None = None,
        rng: random.Random | None = None,
        max_age_seconds: float | None = None,
    ):
        if mode not in ("live", "offline"):
            raise ContractError(f"mode must be 'live' or 'offline', got {mode!r}")
        self.store = store
        self.mode = mode
        self.budget = budget or RateBudget()
        self.base_url = base_url
        self.mailto = mailto
        self._transport = transport
        self._sleep = sleep
        self._utc_now = utc_now or (lambda: datetime.now(timezone.utc))
        self._rng = rng or random.Random()
        self._limiter = RateLimiter(self.budget.requests_per_second, clock, sleep)
        self._max_age = max_age_seconds
        self.requests_issued = 0

    def count_works(self, expr: QueryExpression) -> HitRecord:
        """Return the hit count for a query, from cache when possible."""
        query_text = expr.render()
        cached = self.store.get(query_text)
        if cached is not None and (self.mode == "offline" or not self._expired(cached)):
            return HitRecord(
                query=cached.query,
                count=cached.count,
                fetched_at=cached.fetched_at,
                source="cache",
            )
        if self.mode == "offline":
            raise ReplayError(f"offline mode: query not in hit cache: {query_text!r}")
        count = self._fetch_count(query_text)
        record = HitRecord(
            query=query_text,
            count=count,
            fetched_at=self._utc_now().strftime("%Y-%m-%dT%H:%M:%SZ"),
            source="network",
        )
        self.store.put(record)
        return record

    def _expired(self, record: HitRecord) -> bool:
        if self._max_age is None:
            return False
        fetched = datetime.strptime(record.fetched_at, "%Y-%m-%dT%H:%M:%SZ").replace(
            tzinfo=timezone.utc
        )
        return (self._utc_now() - fetched).total_seconds() > self._max_age

    def _fetch_count(self, query_text: str) -> int:
        transport = self._transport or requests_transport()
        params: dict[str, str] = {"per-page": "1"}
        if query_text:
            params["search"] = query_text
        if self.mailto:
            params["mailto"] = self.mailto
        budget = self.budget
        last_error = "no attempts made"
        for attempt in range(budget.max_attempts):
            if attempt > 0:
                delay = budget.backoff_base * budget.backoff_factor ** (attempt - 1)
                delay *= 1.0 + budget.jitter * self._rng.random()
                self._sleep(delay)
            self._limiter.acquire()
            self.requests_issued += 1
            try:
                status, body = transport(self.base_url, params)
            except TransportError as exc:
                last_error = str(exc)
                continue
            if status == 200:
                return self._parse_count(query_text, body)
            if status == 429 or status >= 500:
                last_error = f"HTTP {status}"
                continue
            raise QueryError(f"HTTP {status} for query {query_text!r}")
        raise TransportError(
            f"retries exhausted ({budget.max_attempts} attempts) for query "
            f"{query_text!r}: {last_error}"
        )

    @staticmethod
    def _parse_count(query_text: str, body: str) -> int:
        try:
            count = json.loads(body)["meta"]["count"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise QueryError(f"malformed response for query {query_text!r}: {exc}") from exc
        if not isinstance(count, int) or count < 0:
            raise QueryError(f"bad count {count!r} for query {query_text!r}")
        return count


@dataclass
class HarvestReport:
    """Outcome of one harvest run over the planned query list."""

    store: HitStore
    issued: int = 0
    from_cache: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)
    not_attempted: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures and not self.not_attempted


def plan_queries(
    keyword_labels: Sequence[str],
    pairs: Sequence[tuple[str, str]],
    context: tuple[str, str],
) -> list[QueryExpression]:
    """Enumerate every query one harvest needs, in deterministic order.

    Covers the whole catalogue (for the total count), the context clause, each
    keyword alone, each keyword conjoined with the context, and each curated
    pair (pair queries carry no context clause; the pair count itself is the
    association signal).
    """
    queries = [TOTAL_QUERY, context_query(context)]
    for label in sorted(keyword_labels):
        queries.append(build_query(label))
    for label in sorted(keyword_labels):
        queries.append(build_query(label, context=context))
    for a, b in sorted(tuple(sorted(p)) for p in pairs):
        queries.append(build_query((a, b)))
    return queries


def harvest(
    client: OpenAlexClient,
    keywords: Iterable,
    pairs: Sequence[tuple[int, int]],
    context: tuple[str, str],
    fail_fast: bool = False,
) -> HarvestReport:
    """Fetch all single and pair counts needed downstream into the store.

    ``pairs`` holds keyword-id pairs referring into ``keywords``.  Queries
    already present in the store are skipped, so interrupted harvests resume
    where they left off.  Failed queries are recorded and do not abort the
    run unless fail_fast is set.
    """
    keyword_list = list(keywords)
    labels = {k.id: k.canonical for k in keyword_list}
    for a, b in pairs:
        if a not in labels or b not in labels:
            raise ContractError(f"pair ({a}, {b}) references unknown keyword ids")
    label_pairs = [(labels[a], labels[b]) for a, b in pairs]

    report = HarvestReport(store=client.store)
    budget = client.budget
    issued_before = client.requests_issued
    for expr in plan_queries(list(labels.values()), label_pairs, context):
        query_text = expr.render()
        if query_text in client.store:
            report.from_cache += 1
            continue
        issued_this_run = client.requests_issued - issued_before
        if budget.max_requests is not None and issued_this_run >= budget.max_requests:
            report.not_attempted.append(query_text)
            continue
        try:
            client.count_works(expr)
        except (QueryError, TransportError, ReplayError) as exc:
            if fail_fast:
                raise
            report.failures.append((query_text, str(exc)))
            continue
        report.issued += 1
    return report


def validate_narrowing(store: HitStore, warn: Callable[[str], None]) -> int:
    """Check count(k AND ctx) <= count(k) and pair <= member minima on a store.

    Live data can drift between requests, so violations only warn.  Returns
    the number of violations found.
    """
    violations = 0
    singles = {}
    for query, record in store.entries.items():
        if query.count(" AND ") == 0 and query.startswith('"'):
            singles[query] = record.count
    for query, record in store.entries.items():
        if " AND " not in query:
            continue
        parts = query.split(" AND ")
        member_counts = [singles[p] for p in parts if p in singles]
        if member_counts and record.count > min(member_counts):
            violations += 1
            warn(
                f"narrowing violated: count({query!r}) = {record.count} exceeds "
                f"member minimum {min(member_counts)}"
            )
    return violations
