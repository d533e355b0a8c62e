"""Visibility-boost relevance scoring of keywords from hit counts.

A keyword's score is its raw hit count multiplied by a visibility boost.  The
default boost is the lift ratio: the keyword's share of context-conditioned
hits relative to its unconditional share of the catalogue.  The boost
function is swappable by name so a different definition can be dropped in
without touching callers, and the chosen name is recorded in output
artifacts.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .catalog import Keyword
from .errors import ConfigError
from .openalex import HitStore, TOTAL_QUERY, build_query, context_query

BoostFunction = Callable[[int, int, int, int], float]


def visibility_boost(h_k: int, h_kc: int, h_c: int, h_all: int) -> float:
    """Lift boost: (h_kc / h_c) / (h_k / h_all), or 0 for a zero-hit keyword.

    h_k: hits of the keyword alone; h_kc: keyword AND context; h_c: context
    alone; h_all: total catalogue size.
    """
    if h_c <= 0 or h_all <= 0:
        raise ConfigError(
            f"context query produced no hits (h_c={h_c}, h_all={h_all}); "
            "the harvest is unusable"
        )
    if h_k == 0:
        return 0.0
    return (h_kc / h_c) / (h_k / h_all)


BOOST_FUNCTIONS: dict[str, BoostFunction] = {"lift": visibility_boost}


def get_boost_function(name: str) -> BoostFunction:
    try:
        return BOOST_FUNCTIONS[name]
    except KeyError:
        raise ConfigError(
            f"unknown boost function {name!r} (available: {', '.join(sorted(BOOST_FUNCTIONS))})"
        )


def relevance_score(h_k: int, boost: float) -> float:
    """Overall relevance: raw hit count times visibility boost."""
    if h_k < 0 or boost < 0:
        raise ValueError("h_k and boost must be non-negative")
    return h_k * boost


@dataclass(frozen=True)
class RelevanceScore:
    """All counts and the derived boost/score for one keyword."""

    keyword_id: int
    h_k: int
    h_kc: int
    h_c: int
    h_all: int
    boost: float
    score: float


@dataclass(frozen=True)
class RelevanceRanking:
    """Keywords ordered by relevance score descending, label ascending on ties."""

    entries: tuple[tuple[int, float], ...]  # (keyword id, score)

    def __len__(self) -> int:
        return len(self.entries)


def compute_scores(
    keywords: Iterable[Keyword],
    store: HitStore,
    context: tuple[str, str],
    boost_function: str = "lift",
) -> list[RelevanceScore]:
    """Score every keyword from the hit store, in keyword-id order.

    Warns (does not fail) when a keyword's context co-hits exceed its raw
    hits, which can happen when live counts drifted between requests.
    """
    boost_fn = get_boost_function(boost_function)
    h_all = store.count(TOTAL_QUERY.render())
    h_c = store.count(context_query(context).render())
    scores = []
    for keyword in sorted(keywords, key=lambda k: k.id):
        h_k = store.count(build_query(keyword.canonical).render())
        h_kc = store.count(build_query(keyword.canonical, context=context).render())
        if h_kc > h_k:
            warnings.warn(
                f"keyword {keyword.canonical!r}: context co-hits {h_kc} exceed raw hits "
                f"{h_k} (drifted live data?)",
                stacklevel=2,
            )
        boost = boost_fn(h_k, h_kc, h_c, h_all)
        scores.append(
            RelevanceScore(
                keyword_id=keyword.id,
                h_k=h_k,
                h_kc=h_kc,
                h_c=h_c,
                h_all=h_all,
                boost=boost,
                score=relevance_score(h_k, boost),
            )
        )
    return scores


def rank_by_relevance(
    scores: Iterable[RelevanceScore],
    labels: Mapping[int, str],
    top_n: int | None = None,
) -> RelevanceRanking:
    """Sort scores descending (ties by label) and optionally truncate."""
    ordered = sorted(scores, key=lambda s: (-s.score, labels[s.keyword_id]))
    if top_n is not None:
        ordered = ordered[:top_n]
    return RelevanceRanking(entries=tuple((s.keyword_id, s.score) for s in ordered))


def write_relevance_csv(
    scores: Sequence[RelevanceScore],
    labels: Mapping[int, str],
    path: str | Path,
    top_n: int | None = None,
) -> None:
    """Write the ranking as rank,keyword,score,h_k,h_kc,boost."""
    by_id = {s.keyword_id: s for s in scores}
    ranking = rank_by_relevance(scores, labels, top_n)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "keyword", "score", "h_k", "h_kc", "boost"])
    for rank, (kid, score) in enumerate(ranking.entries, start=1):
        s = by_id[kid]
        writer.writerow([rank, labels[kid], repr(score), s.h_k, s.h_kc, repr(s.boost)])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
