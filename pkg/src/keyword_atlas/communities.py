"""Community detection on the keyword graph by Louvain modularity maximization.

Weighted modularity of a partition, with a resolution parameter:

    q = sum over communities c of [ w_in(c)/W - resolution * (s(c)/W)^2 ]

where W is twice the total edge weight, w_in(c) twice the weight internal to
c, and s(c) the summed weighted degree of c.  Louvain alternates a local
node-moving phase with community aggregation; the node visit order is a
seeded shuffle fixed per level, so results are reproducible from
(graph, seed, resolution).
"""

from __future__ import annotations

import csv
import io
import json
import random
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import ContractError
from .graph import KeywordGraph

#: Moves must improve modularity by more than this (in modularity units, so
#: the threshold is invariant under uniform weight scaling).
GAIN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Partition:
    """A community assignment with its modularity and provenance."""

    assignment: Mapping[int, int]  # keyword id -> community id
    community_count: int
    q: float
    resolution: float
    seed: int

    def __post_init__(self):
        communities = set(self.assignment.values())
        if communities and communities != set(range(self.community_count)):
            raise ContractError("community ids must be dense in [0, community_count)")
        if not communities and self.community_count != 0:
            raise ContractError("empty assignment with nonzero community_count")
        if self.resolution == 1.0 and not (-0.5 - 1e-9 <= self.q <= 1.0 + 1e-9):
            raise ContractError(f"modularity {self.q} outside [-1/2, 1]")

    def members(self) -> dict[int, list[int]]:
        groups: dict[int, list[int]] = {c: [] for c in range(self.community_count)}
        for node, c in sorted(self.assignment.items()):
            groups[c].append(node)
        return groups


def modularity(
    graph: KeywordGraph,
    partition: Partition | Mapping[int, int],
    resolution: float = 1.0,
) -> float:
    """Weighted modularity of a partition of the graph's nodes.

    The partition must cover exactly the node set.  An edgeless graph has
    modularity 0 by convention.
    """
    assignment = partition.assignment if isinstance(partition, Partition) else partition
    if set(assignment) != set(graph.nodes):
        raise ContractError("partition must cover exactly the graph's node set")
    big_w = 2.0 * graph.total_weight()
    if big_w == 0.0:
        return 0.0
    w_in: dict[int, float] = {}
    s: dict[int, float] = {}
    for e in graph.edges:
        ca, cb = assignment[e.a], assignment[e.b]
        s[ca] = s.get(ca, 0.0) + e.weight
        s[cb] = s.get(cb, 0.0) + e.weight
        if ca == cb:
            w_in[ca] = w_in.get(ca, 0.0) + 2.0 * e.weight
    q = 0.0
    for c in sorted(set(assignment.values())):
        q += w_in.get(c, 0.0) / big_w - resolution * (s.get(c, 0.0) / big_w) ** 2
    return q


def singleton_partition(graph: KeywordGraph) -> dict[int, int]:
    """Every node in its own community (Louvain's starting point)."""
    return {nid: i for i, nid in enumerate(graph.node_ids)}


class _Level:
    """One aggregation level: indexed nodes, adjacency, self-loop weights."""

    def __init__(self, n: int, edges: list[tuple[int, int, float]], self_w: list[float]):
        self.n = n
        self.edges = edges
        self.self_w = self_w
        self.adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for a, b, w in edges:
            self.adj[a].append((b, w))
            self.adj[b].append((a, w))
        self.k = [sum(w for _, w in self.adj[i]) + 2.0 * self_w[i] for i in range(n)]
        self.big_w = sum(self.k)

    @classmethod
    def from_graph(cls, graph: KeywordGraph, index: Mapping[int, int]) -> "_Level":
        edges = [(index[e.a], index[e.b], e.weight) for e in graph.edges]
        return cls(len(index), edges, [0.0] * len(index))


def _move_nodes(level: _Level, rng: random.Random, resolution: float, tol: float):
    """Phase 1: greedy local moves until a full pass yields no gain > tol.

    Returns (community per node, whether anything moved).  Gains are computed
    in modularity units; ties go to the lowest community id, and a node only
    moves for a gain strictly above re-joining its own community.
    """
    n, adj, k, self_w, big_w = level.n, level.adj, level.k, level.self_w, level.big_w
    comm = list(range(n))
    s = list(k)
    order = list(range(n))
    rng.shuffle(order)
    inv_w = 1.0 / big_w
    any_move = False
    improved = True
    while improved:
        improved = False
        for i in order:
            ci = comm[i]
            nw: dict[int, float] = {}
            for j, w in adj[i]:
                cj = comm[j]
                nw[cj] = nw.get(cj, 0.0) + w
            k_i = k[i]
            s[ci] -= k_i
            degree_term = 2.0 * resolution * k_i * inv_w * inv_w
            best_c = ci
            best_gain = 2.0 * nw.get(ci, 0.0) * inv_w - degree_term * s[ci]
            for c in sorted(nw):
                if c == ci:
                    continue
                gain = 2.0 * nw[c] * inv_w - degree_term * s[c]
                if gain > best_gain + tol:
                    best_c = c
                    best_gain = gain
            s[best_c] += k_i
            if best_c != ci:
                comm[i] = best_c
                improved = True
                any_move = True
    return comm, any_move


def _aggregate(level: _Level, dense_comm: list[int], count: int) -> _Level:
    """Phase 2: collapse communities into super-nodes with self-loops."""
    self_w = [0.0] * count
    for i in range(level.n):
        self_w[dense_comm[i]] += level.self_w[i]
    between: dict[tuple[int, int], float] = {}
    for a, b, w in level.edges:
        ca, cb = dense_comm[a], dense_comm[b]
        if ca == cb:
            self_w[ca] += w
        else:
            key = (ca, cb) if ca < cb else (cb, ca)
            between[key] = between.get(key, 0.0) + w
    edges = [(a, b, w) for (a, b), w in sorted(between.items())]
    return _Level(count, edges, self_w)


def _densify(comm: list[int]) -> tuple[list[int], int]:
    ids = sorted(set(comm))
    remap = {old: new for new, old in enumerate(ids)}
    return [remap[c] for c in comm], len(ids)


def louvain(graph: KeywordGraph, seed: int, resolution: float = 1.0) -> Partition:
    """Detect communities by two-phase Louvain modularity maximization.

    Deterministic given (graph, seed, resolution).  An edgeless graph
    degenerates to singletons with q = 0 and a warning.
    """
    nodes = graph.node_ids
    if not nodes:
        raise ContractError("graph has no nodes")
    if resolution <= 0:
        raise ContractError("resolution must be positive")
    if not graph.edges:
        warnings.warn("graph has no edges; every node becomes its own community")
        assignment = singleton_partition(graph)
        return Partition(
            assignment=assignment,
            community_count=len(nodes),
            q=0.0,
            resolution=resolution,
            seed=seed,
        )

    rng = random.Random(seed)
    index = {nid: i for i, nid in enumerate(nodes)}
    level = _Level.from_graph(graph, index)
    node_to_super = list(range(len(nodes)))

    while True:
        comm, any_move = _move_nodes(level, rng, resolution, GAIN_TOLERANCE)
        if not any_move:
            break
        dense, count = _densify(comm)
        node_to_super = [dense[c] for c in node_to_super]
        if count == level.n:
            break
        level = _aggregate(level, dense, count)

    dense_final, community_count = _densify(node_to_super)
    assignment = {nid: dense_final[index[nid]] for nid in nodes}
    q = modularity(graph, assignment, resolution)
    return Partition(
        assignment=assignment,
        community_count=community_count,
        q=q,
        resolution=resolution,
        seed=seed,
    )


def write_partition_csv(partition: Partition, labels: Mapping[int, str], path: str | Path) -> None:
    """Write keyword,community rows sorted by community then label."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["keyword", "community"])
    rows = sorted(
        ((labels[nid], c) for nid, c in partition.assignment.items()),
        key=lambda r: (r[1], r[0]),
    )
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_partition_meta(partition: Partition, path: str | Path) -> None:
    meta = {
        "seed": partition.seed,
        "resolution": partition.resolution,
        "q": partition.q,
        "community_count": partition.community_count,
    }
    Path(path).write_text(
        json.dumps(meta, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def read_partition_csv(path: str | Path, ids_by_label: Mapping[str, int]) -> dict[int, int]:
    assignment = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            assignment[ids_by_label[row["keyword"]]] = int(row["community"])
    return assignment
