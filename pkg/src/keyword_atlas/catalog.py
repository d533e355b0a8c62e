"""Curated keyword/mention ingestion and the mention-frequency ranking.

The mention file is a UTF-8 CSV with header ``keyword,source,origin`` where
``source`` is one of the three curated dataset tags.  The alias file is a
UTF-8 CSV with header ``alias,canonical``; aliases merge alternative surface
forms ("ABM") into one canonical keyword ("agent-based modeling").
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, TextIO

from .errors import NormalizationError, ParseError

SOURCES = ("social_media", "books", "online_resources")

MENTION_HEADER = ["keyword", "source", "origin"]
ALIAS_HEADER = ["alias", "canonical"]


@dataclass(frozen=True)
class MentionRecord:
    """One curated mention of a keyword in a single source dataset."""

    raw_text: str
    source: str
    origin: str = ""

    def __post_init__(self):
        if not self.raw_text.strip():
            raise NormalizationError("mention record has empty keyword text")
        if self.source not in SOURCES:
            raise ParseError(f"unknown source tag {self.source!r}")


@dataclass(frozen=True)
class Keyword:
    """A canonical keyword with provenance flags and its mention tally."""

    id: int
    canonical: str
    aliases: frozenset[str] = frozenset()
    sources: frozenset[str] = frozenset()
    mention_count: int = 0

    def __post_init__(self):
        if self.mention_count < 0:
            raise ValueError("mention_count must be non-negative")
        if self.canonical != _basic_normalize(self.canonical) or not self.canonical:
            raise ValueError(f"canonical label {self.canonical!r} is not normalized")


@dataclass(frozen=True)
class FrequencyRanking:
    """Keywords ordered by mention count, restricted to counts >= threshold."""

    entries: tuple[tuple[int, int], ...]  # (keyword id, mention_count)
    threshold: int

    def __len__(self) -> int:
        return len(self.entries)


def _basic_normalize(raw: str) -> str:
    return " ".join(raw.lower().split())


def normalize_keyword(raw: str, aliases: Mapping[str, str] | None = None) -> str:
    """Normalize a raw surface form to its canonical keyword label.

    Lowercases, trims, and collapses internal whitespace; if the result is an
    alias-table key the mapped canonical form is returned instead.  Raises
    NormalizationError for input that is empty after trimming.
    """
    text = _basic_normalize(raw)
    if not text:
        raise NormalizationError(f"keyword empty after trimming: {raw!r}")
    if aliases:
        return aliases.get(text, text)
    return text


def load_aliases(source: str | Path | TextIO) -> dict[str, str]:
    """Read an alias CSV into a lookup table of alias -> canonical label.

    Both columns are normalized on load.  An alias may not repeat and may not
    itself appear as a canonical value (that would make normalization
    non-idempotent).
    """
    rows = _read_csv(source, ALIAS_HEADER)
    table: dict[str, str] = {}
    lines: dict[str, int] = {}
    for line_num, row in rows:
        alias = _basic_normalize(row[0])
        canonical = _basic_normalize(row[1])
        if not alias or not canonical:
            raise ParseError("empty alias or canonical value", line=line_num)
        if alias in table:
            raise ParseError(
                f"duplicate alias {alias!r} (first defined on line {lines[alias]})",
                line=line_num,
            )
        table[alias] = canonical
        lines[alias] = line_num
    for alias, canonical in table.items():
        if canonical in table:
            raise ParseError(
                f"canonical value {canonical!r} of alias {alias!r} is itself an alias",
                line=lines[canonical],
            )
    return table


def parse_mentions(source: str | Path | TextIO) -> list[MentionRecord]:
    """Parse a mention CSV into records, preserving file order.

    Raises ParseError naming the 1-based line number for rows with an unknown
    source tag or the wrong number of fields.
    """
    records = []
    for line_num, row in _read_csv(source, MENTION_HEADER):
        keyword, source_tag, origin = row
        if source_tag not in SOURCES:
            raise ParseError(
                f"unknown source tag {source_tag!r} (expected one of {', '.join(SOURCES)})",
                line=line_num,
            )
        if not keyword.strip():
            raise ParseError("empty keyword field", line=line_num)
        records.append(MentionRecord(raw_text=keyword, source=source_tag, origin=origin))
    return records


def tally_mentions(
    records: Iterable[MentionRecord],
    aliases: Mapping[str, str] | None = None,
    threshold: int = 3,
) -> tuple[list[Keyword], FrequencyRanking]:
    """Merge mentions into keywords and rank them by mention frequency.

    Every record counts as exactly one mention of its normalized keyword.
    Returns the full keyword list (ids assigned in sorted-label order, so the
    result does not depend on record order) together with the ranking of
    keywords reaching the threshold.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    counts: dict[str, int] = {}
    sources: dict[str, set[str]] = {}
    for record in records:
        canonical = normalize_keyword(record.raw_text, aliases)
        counts[canonical] = counts.get(canonical, 0) + 1
        sources.setdefault(canonical, set()).add(record.source)

    alias_map: dict[str, set[str]] = {}
    if aliases:
        for alias, canonical in aliases.items():
            alias_map.setdefault(canonical, set()).add(alias)

    keywords = [
        Keyword(
            id=i,
            canonical=label,
            aliases=frozenset(alias_map.get(label, ())),
            sources=frozenset(sources[label]),
            mention_count=counts[label],
        )
        for i, label in enumerate(sorted(counts))
    ]
    ranking = rank_by_mentions(keywords, threshold)
    return keywords, ranking


def rank_by_mentions(keywords: Iterable[Keyword], threshold: int) -> FrequencyRanking:
    """Build the frequency ranking: count descending, label ascending on ties."""
    kept = [k for k in keywords if k.mention_count >= threshold]
    kept.sort(key=lambda k: (-k.mention_count, k.canonical))
    return FrequencyRanking(
        entries=tuple((k.id, k.mention_count) for k in kept),
        threshold=threshold,
    )


def _read_csv(
    source: str | Path | TextIO, expected_header: list[str]
) -> list[tuple[int, list[str]]]:
    """Read a small CSV file, checking the header and tracking line numbers."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            return _read_csv(fh, expected_header)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"missing header row (expected {','.join(expected_header)})")
    if [h.strip().lower() for h in header] != expected_header:
        raise ParseError(
            f"bad header {','.join(header)!r} (expected {','.join(expected_header)})",
            line=1,
        )
    rows = []
    for row in reader:
        if not row or (len(row) == 1 and not row[0].strip()):
            continue  # blank line
        if len(row) != len(expected_header):
            raise ParseError(
                f"expected {len(expected_header)} fields, got {len(row)}",
                line=reader.line_num,
            )
        rows.append((reader.line_num, row))
    return rows


def write_keywords_csv(keywords: Iterable[Keyword], path: str | Path) -> None:
    """Write the full keyword table (one row per keyword, id order)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "keyword", "mention_count", "sources", "aliases"])
    for k in sorted(keywords, key=lambda k: k.id):
        writer.writerow(
            [
                k.id,
                k.canonical,
                k.mention_count,
                "|".join(sorted(k.sources)),
                "|".join(sorted(k.aliases)),
            ]
        )
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_keywords_csv(path: str | Path) -> list[Keyword]:
    """Read back a keyword table written by write_keywords_csv."""
    keywords = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            keywords.append(
                Keyword(
                    id=int(row["id"]),
                    canonical=row["keyword"],
                    mention_count=int(row["mention_count"]),
                    sources=frozenset(s for s in row["sources"].split("|") if s),
                    aliases=frozenset(a for a in row["aliases"].split("|") if a),
                )
            )
    return keywords


def write_mention_ranking_csv(
    ranking: FrequencyRanking, keywords: Iterable[Keyword], path: str | Path
) -> None:
    """Write the thresholded mention ranking as rank,keyword,mentions."""
    labels = {k.id: k.canonical for k in keywords}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "keyword", "mentions"])
    for rank, (kid, count) in enumerate(ranking.entries, start=1):
        writer.writerow([rank, labels[kid], count])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
