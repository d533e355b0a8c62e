"""Explorer export: the JSON contract between the pipeline and the UI.

Top-level fields: ``meta`` {generated_at, seed, resolution, boost_function,
q}, ``nodes`` [{id, label, score, mentions, community, x, y}], ``edges``
[{source, target, weight, pair_hits}].  Field names are a stable contract
with the explorer; exports are byte-deterministic given identical inputs and
round-trip losslessly through parse_export.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

from .communities import Partition
from .errors import ExportError
from .graph import KeywordGraph
from .layout import LayoutResult

META_FIELDS = ("generated_at", "seed", "resolution", "boost_function", "q")
NODE_FIELDS = ("id", "label", "score", "mentions", "community", "x", "y")
EDGE_FIELDS = ("source", "target", "weight", "pair_hits")


def export_explorer_json(
    graph: KeywordGraph,
    layout: LayoutResult,
    partition: Partition,
    mention_counts: Mapping[int, int],
    meta: Mapping[str, Any],
) -> str:
    """Serialize the network, coordinates, communities, and per-node stats."""
    node_set = set(graph.nodes)
    if set(partition.assignment) != node_set:
        raise ExportError("partition does not cover the graph's node set")
    if not node_set <= set(layout.positions):
        raise ExportError("layout does not cover the graph's node set")
    if not node_set <= set(mention_counts):
        raise ExportError("mention counts do not cover the graph's node set")
    missing_meta = [f for f in META_FIELDS if f not in meta]
    if missing_meta:
        raise ExportError(f"meta is missing fields: {', '.join(missing_meta)}")

    payload = {
        "meta": {f: meta[f] for f in META_FIELDS},
        "nodes": [
            {
                "id": nid,
                "label": graph.nodes[nid].label,
                "score": graph.nodes[nid].score,
                "mentions": mention_counts[nid],
                "community": partition.assignment[nid],
                "x": layout.positions[nid][0],
                "y": layout.positions[nid][1],
            }
            for nid in graph.node_ids
        ],
        "edges": [
            {
                "source": e.a,
                "target": e.b,
                "weight": e.weight,
                "pair_hits": e.pair_hits,
            }
            for e in graph.edges
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def parse_export(text: str) -> dict:
    """Parse and validate an explorer export document."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ExportError(f"export is not valid JSON: {exc}") from exc
    for field in ("meta", "nodes", "edges"):
        if field not in payload:
            raise ExportError(f"export is missing the {field!r} field")
    for field in META_FIELDS:
        if field not in payload["meta"]:
            raise ExportError(f"export meta is missing the {field!r} field")
    node_ids = set()
    for node in payload["nodes"]:
        for field in NODE_FIELDS:
            if field not in node:
                raise ExportError(f"node record is missing the {field!r} field")
        node_ids.add(node["id"])
    for edge in payload["edges"]:
        for field in EDGE_FIELDS:
            if field not in edge:
                raise ExportError(f"edge record is missing the {field!r} field")
        if edge["source"] not in node_ids or edge["target"] not in node_ids:
            raise ExportError(
                f"edge ({edge['source']}, {edge['target']}) references unknown node"
            )
    return payload
