import json
from pathlib import Path

import pytest

from keyword_atlas.graph import GraphEdge, GraphNode, KeywordGraph

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "data" / "fixture"


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    assert FIXTURE_DIR.is_dir(), "run tools/make_fixture.py first"
    return FIXTURE_DIR


def make_graph(n_or_ids, edges) -> KeywordGraph:
    """Build a small test graph; edges are (a, b, weight) triples."""
    ids = range(n_or_ids) if isinstance(n_or_ids, int) else n_or_ids
    nodes = {i: GraphNode(label=f"k{i}", score=1.0) for i in ids}
    edge_objs = [
        GraphEdge(a=min(a, b), b=max(a, b), pair_hits=1, weight=float(w))
        for a, b, w in edges
    ]
    return KeywordGraph(nodes, edge_objs)


class FakeTransport:
    """Scripted transport: maps the search param to queued (status, body) replies.

    A plain count value is shorthand for a single 200 response carrying it.
    """

    def __init__(self, responses=None, default_count=None):
        self.responses = {}
        for query, replies in (responses or {}).items():
            if isinstance(replies, int):
                replies = [(200, json.dumps({"meta": {"count": replies}}))]
            self.responses[query] = list(replies)
        self.default_count = default_count
        self.calls = []

    def __call__(self, url, params):
        query = params.get("search", "")
        self.calls.append((url, dict(params)))
        queue = self.responses.get(query)
        if queue:
            reply = queue.pop(0) if len(queue) > 1 else queue[0]
            return reply
        if self.default_count is not None:
            return 200, json.dumps({"meta": {"count": self.default_count}})
        raise AssertionError(f"unexpected query {query!r}")


@pytest.fixture
def tmp_config(tmp_path, fixture_dir):
    """Factory for a TOML config pointing at the bundled fixture."""

    def make(**overrides) -> Path:
        output = overrides.pop("output", tmp_path / "out")
        cache = overrides.pop("cache", fixture_dir / "hits.json")
        mode = overrides.pop("mode", "offline")
        seed = overrides.pop("seed", 42)
        extra = overrides.pop("extra", "")
        assert not overrides, f"unknown overrides: {overrides}"
        text = f"""
[paths]
mentions = "{fixture_dir / 'mentions.csv'}"
aliases = "{fixture_dir / 'aliases.csv'}"
associations = "{fixture_dir / 'associations.csv'}"
cache = "{cache}"
output = "{output}"

[analysis]
seed = {seed}

[harvest]
mode = "{mode}"
{extra}
"""
        path = tmp_path / "atlas.toml"
        path.write_text(text, encoding="utf-8")
        return path

    return make
