"""Construction of the curated weighted keyword-association network.

Edges exist only for manually accepted keyword pairs; the weight of an edge
is the pair's hit count multiplied by both endpoints' relevance scores.  The
curation step guards against common-word pairs whose large co-hit counts do
not reflect scientific relatedness.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

from .catalog import Keyword, _read_csv, normalize_keyword
from .errors import GraphBuildError, ParseError
from .openalex import HitStore, build_query
from .relevance import RelevanceScore

ASSOCIATION_HEADER = ["keyword_a", "keyword_b", "accepted", "note"]


@dataclass(frozen=True)
class AssociationCandidate:
    """A manually reviewed keyword pair; only accepted pairs become edges."""

    keyword_a: int  # lower keyword id of the unordered pair
    keyword_b: int
    accepted: bool
    note: str = ""

    def __post_init__(self):
        if self.keyword_a == self.keyword_b:
            raise GraphBuildError(f"self-pair for keyword id {self.keyword_a}")
        if self.keyword_a > self.keyword_b:
            raise GraphBuildError("pair ids must be canonicalized to (min, max)")


@dataclass(frozen=True)
class GraphNode:
    label: str
    score: float


@dataclass(frozen=True)
class GraphEdge:
    a: int
    b: int
    pair_hits: int
    weight: float


class KeywordGraph:
    """Undirected simple graph over keyword ids with positive edge weights."""

    def __init__(self, nodes: Mapping[int, GraphNode], edges: Iterable[GraphEdge]):
        self.nodes: dict[int, GraphNode] = dict(nodes)
        self.edges: tuple[GraphEdge, ...] = tuple(
            sorted(edges, key=lambda e: (e.a, e.b))
        )
        seen = set()
        for edge in self.edges:
            if edge.a == edge.b:
                raise GraphBuildError(f"self-loop on node {edge.a}")
            if edge.a > edge.b:
                raise GraphBuildError(f"edge ({edge.a}, {edge.b}) not in (min, max) order")
            if (edge.a, edge.b) in seen:
                raise GraphBuildError(f"duplicate edge ({edge.a}, {edge.b})")
            if edge.weight <= 0:
                raise GraphBuildError(f"non-positive weight on edge ({edge.a}, {edge.b})")
            if edge.a not in self.nodes or edge.b not in self.nodes:
                raise GraphBuildError(f"edge ({edge.a}, {edge.b}) references unknown node")
            seen.add((edge.a, edge.b))

    @property
    def node_ids(self) -> list[int]:
        return sorted(self.nodes)

    def adjacency(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {i: [] for i in self.nodes}
        for e in self.edges:
            adj[e.a].append((e.b, e.weight))
            adj[e.b].append((e.a, e.weight))
        return adj

    def total_weight(self) -> float:
        return sum(e.weight for e in self.edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KeywordGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges


def load_associations(
    source: str | Path | TextIO,
    keywords: Iterable[Keyword],
    aliases: Mapping[str, str] | None = None,
) -> list[AssociationCandidate]:
    """Read the curated association allowlist, resolving labels to keyword ids.

    Pairs are canonicalized to (min id, max id); a pair appearing twice (in
    either order) is an error reporting both line numbers, as is a label that
    is not in the keyword list.
    """
    by_label = {k.canonical: k.id for k in keywords}
    candidates = []
    seen: dict[tuple[int, int], int] = {}
    for line_num, row in _read_csv(source, ASSOCIATION_HEADER):
        label_a = normalize_keyword(row[0], aliases)
        label_b = normalize_keyword(row[1], aliases)
        accepted_text = row[2].strip().lower()
        if accepted_text not in ("true", "false"):
            raise ParseError(
                f"accepted must be true or false, got {row[2]!r}", line=line_num
            )
        for label in (label_a, label_b):
            if label not in by_label:
                raise ParseError(f"unknown keyword label {label!r}", line=line_num)
        a, b = sorted((by_label[label_a], by_label[label_b]))
        if a == b:
            raise ParseError(f"pair of {label_a!r} with itself", line=line_num)
        if (a, b) in seen:
            raise ParseError(
                f"duplicate pair ({label_a!r}, {label_b!r}), first seen on line {seen[(a, b)]}",
                line=line_num,
            )
        seen[(a, b)] = line_num
        candidates.append(
            AssociationCandidate(
                keyword_a=a, keyword_b=b, accepted=accepted_text == "true", note=row[3]
            )
        )
    return candidates


def build_graph(
    keywords: Iterable[Keyword],
    scores: Iterable[RelevanceScore],
    pair_hits: HitStore,
    allowlist: Iterable[AssociationCandidate],
) -> KeywordGraph:
    """Assemble the association network from accepted pairs.

    Edge weight = pair hit count x score(a) x score(b).  Zero-weight edges
    are dropped (a zero-hit or zero-score pair carries no association signal)
    and only keywords left with at least one edge become nodes; the rest stay
    in the rankings but not in the graph.
    """
    labels = {k.id: k.canonical for k in keywords}
    score_by_id = {s.keyword_id: s.score for s in scores}
    edges = []
    for cand in allowlist:
        if not cand.accepted:
            continue
        label_a, label_b = labels[cand.keyword_a], labels[cand.keyword_b]
        query = build_query(tuple(sorted((label_a, label_b)))).render()
        record = pair_hits.get(query)
        if record is None:
            raise GraphBuildError(
                f"accepted pair ({label_a!r}, {label_b!r}) missing from hit store"
            )
        weight = record.count * score_by_id[cand.keyword_a] * score_by_id[cand.keyword_b]
        if weight <= 0:
            continue
        edges.append(
            GraphEdge(a=cand.keyword_a, b=cand.keyword_b, pair_hits=record.count, weight=weight)
        )
    incident = {e.a for e in edges} | {e.b for e in edges}
    nodes = {
        kid: GraphNode(label=labels[kid], score=score_by_id[kid]) for kid in sorted(incident)
    }
    return KeywordGraph(nodes=nodes, edges=edges)


def isolated_keywords(keywords: Iterable[Keyword], graph: KeywordGraph) -> list[str]:
    """Labels of keywords excluded from the graph, for the sidecar report."""
    return sorted(k.canonical for k in keywords if k.id not in graph.nodes)


def write_edges_csv(graph: KeywordGraph, path: str | Path) -> None:
    """Dump the edge list as a,b,pair_hits,weight with keyword labels."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["a", "b", "pair_hits", "weight"])
    for e in graph.edges:
        writer.writerow(
            [graph.nodes[e.a].label, graph.nodes[e.b].label, e.pair_hits, repr(e.weight)]
        )
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_nodes_csv(graph: KeywordGraph, path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "label", "score"])
    for kid in graph.node_ids:
        node = graph.nodes[kid]
        writer.writerow([kid, node.label, repr(node.score)])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_graph_csv(nodes_path: str | Path, edges_path: str | Path) -> KeywordGraph:
    """Rebuild a KeywordGraph from its nodes and edges dumps."""
    nodes: dict[int, GraphNode] = {}
    with open(nodes_path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            nodes[int(row["id"])] = GraphNode(label=row["label"], score=float(row["score"]))
    by_label = {node.label: kid for kid, node in nodes.items()}
    edges = []
    with open(edges_path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            a, b = sorted((by_label[row["a"]], by_label[row["b"]]))
            edges.append(
                GraphEdge(a=a, b=b, pair_hits=int(row["pair_hits"]), weight=float(row["weight"]))
            )
    return KeywordGraph(nodes=nodes, edges=edges)
