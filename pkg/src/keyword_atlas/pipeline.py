"""Staged, hash-gated pipeline orchestration.

Stages: ingest -> harvest -> score -> build -> detect -> layout -> render ->
export.  Each stage reads only its declared inputs and writes only its
declared outputs under the fixed output layout (rankings/, graph/,
communities/, figures/, export/).  A stage whose inputs and configuration
are unchanged since its last successful run is skipped, so reruns are
no-ops and interrupted pipelines resume where they stopped.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import catalog, communities, graph as graph_mod, layout as layout_mod
from . import openalex, relevance, render
from .errors import ConfigError, DependencyError, ReplayError, TransportError
from .export import export_explorer_json

STAGES = ("ingest", "harvest", "score", "build", "detect", "layout", "render", "export")

STATE_FILE = ".atlas_state.json"


@dataclass(frozen=True)
class PipelineConfig:
    mentions_path: Path
    associations_path: Path
    cache_path: Path
    output_dir: Path
    aliases_path: Path | None = None
    context: tuple[str, str] = ("complex systems", "complexity science")
    threshold: int = 3
    top_n: int | None = 73
    seed: int = 42
    resolution: float = 1.0
    boost_function: str = "lift"
    mode: str = "offline"
    mailto: str | None = None
    requests_per_second: float = 5.0
    max_requests: int | None = None
    fail_fast: bool = False
    network_canvas: tuple[int, int] = (1280, 960)
    wordcloud_canvas: tuple[int, int] = (1200, 900)
    wordcloud_min_font: float = 9.0
    wordcloud_max_font: float = 42.0
    annotations: tuple[render.Annotation, ...] = ()

    def validate(self) -> None:
        if self.threshold < 0:
            raise ConfigError("threshold must be >= 0")
        if self.top_n is not None and self.top_n < 1:
            raise ConfigError("top_n must be >= 1 (or omitted)")
        if self.resolution <= 0:
            raise ConfigError("resolution must be positive")
        if self.mode not in ("live", "offline"):
            raise ConfigError(f"mode must be 'live' or 'offline', got {self.mode!r}")
        if self.requests_per_second <= 0:
            raise ConfigError("requests_per_second must be positive")
        if len(self.context) != 2 or not all(p.strip() for p in self.context):
            raise ConfigError("context must be a pair of non-empty phrases")
        for name, path in (
            ("mentions", self.mentions_path),
            ("associations", self.associations_path),
        ):
            if not Path(path).is_file():
                raise ConfigError(f"{name} file not found: {path}")
        if self.aliases_path is not None and not Path(self.aliases_path).is_file():
            raise ConfigError(f"aliases file not found: {self.aliases_path}")

    def snapshot(self) -> dict:
        """Resolved configuration as plain JSON-serializable data."""
        return {
            "paths": {
                "mentions": str(self.mentions_path),
                "aliases": str(self.aliases_path) if self.aliases_path else None,
                "associations": str(self.associations_path),
                "cache": str(self.cache_path),
                "output": str(self.output_dir),
            },
            "context": list(self.context),
            "threshold": self.threshold,
            "top_n": self.top_n,
            "seed": self.seed,
            "resolution": self.resolution,
            "boost_function": self.boost_function,
            "mode": self.mode,
            "mailto": self.mailto,
            "requests_per_second": self.requests_per_second,
            "max_requests": self.max_requests,
            "fail_fast": self.fail_fast,
            "network_canvas": list(self.network_canvas),
            "wordcloud_canvas": list(self.wordcloud_canvas),
            "wordcloud_min_font": self.wordcloud_min_font,
            "wordcloud_max_font": self.wordcloud_max_font,
            "annotations": [
                {"x": a.x, "y": a.y, "dx": a.dx, "dy": a.dy, "text": a.text}
                for a in self.annotations
            ],
        }


def load_config(path: str | Path) -> PipelineConfig:
    """Load a TOML config file; relative paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    base = path.parent

    def _resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else (base / candidate).resolve()

    try:
        paths = raw["paths"]
        config = PipelineConfig(
            mentions_path=_resolve(paths["mentions"]),
            associations_path=_resolve(paths["associations"]),
            cache_path=_resolve(paths["cache"]),
            output_dir=_resolve(paths["output"]),
            aliases_path=_resolve(paths["aliases"]) if paths.get("aliases") else None,
            context=tuple(raw.get("query", {}).get("context", PipelineConfig.context)),
            mailto=raw.get("query", {}).get("mailto") or None,
            threshold=raw.get("ranking", {}).get("threshold", 3),
            top_n=_none_if_zero(raw.get("ranking", {}).get("top_n", 73)),
            seed=raw.get("analysis", {}).get("seed", 42),
            resolution=float(raw.get("analysis", {}).get("resolution", 1.0)),
            boost_function=raw.get("analysis", {}).get("boost_function", "lift"),
            mode=raw.get("harvest", {}).get("mode", "offline"),
            requests_per_second=float(
                raw.get("harvest", {}).get("requests_per_second", 5.0)
            ),
            max_requests=_none_if_zero(raw.get("harvest", {}).get("max_requests", 0)),
            fail_fast=raw.get("harvest", {}).get("fail_fast", False),
            network_canvas=tuple(raw.get("style", {}).get("network_canvas", (1280, 960))),
            wordcloud_canvas=tuple(
                raw.get("style", {}).get("wordcloud_canvas", (1200, 900))
            ),
            wordcloud_min_font=float(raw.get("style", {}).get("wordcloud_min_font", 9.0)),
            wordcloud_max_font=float(raw.get("style", {}).get("wordcloud_max_font", 42.0)),
            annotations=tuple(
                render.Annotation(
                    x=float(a["x"]),
                    y=float(a["y"]),
                    dx=float(a["dx"]),
                    dy=float(a["dy"]),
                    text=str(a.get("text", "")),
                )
                for a in raw.get("annotations", [])
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    config.validate()
    return config


def _none_if_zero(value: int | None) -> int | None:
    return None if not value else int(value)


# ---------------------------------------------------------------------------
# artifact paths

def artifact_paths(config: PipelineConfig) -> dict[str, dict[str, Path]]:
    out = Path(config.output_dir)
    return {
        "ingest": {
            "keywords": out / "rankings" / "keywords.csv",
            "mention_ranking": out / "rankings" / "mentions.csv",
        },
        "harvest": {"cache": Path(config.cache_path)},
        "score": {
            "relevance": out / "rankings" / "relevance.csv",
            "relevance_top": out / "rankings" / "relevance_top.csv",
            "relevance_meta": out / "rankings" / "relevance_meta.json",
        },
        "build": {
            "nodes": out / "graph" / "nodes.csv",
            "edges": out / "graph" / "edges.csv",
            "isolated": out / "graph" / "isolated.csv",
        },
        "detect": {
            "partition": out / "communities" / "partition.csv",
            "partition_meta": out / "communities" / "meta.json",
        },
        "layout": {
            "layout_network": out / "figures" / "layout_network.json",
            "layout_communities": out / "figures" / "layout_communities.json",
        },
        "render": {
            "network_svg": out / "figures" / "network.svg",
            "communities_svg": out / "figures" / "communities.svg",
            "wordcloud_mentions": out / "figures" / "wordcloud_mentions.svg",
            "wordcloud_relevance": out / "figures" / "wordcloud_relevance.svg",
        },
        "export": {"explorer": out / "export" / "keyword_map.json"},
    }


#: For each stage: the stages whose outputs it consumes.
STAGE_DEPS: dict[str, tuple[str, ...]] = {
    "ingest": (),
    "harvest": ("ingest",),
    "score": ("ingest", "harvest"),
    "build": ("ingest", "harvest"),
    "detect": ("build",),
    "layout": ("build", "detect"),
    "render": ("ingest", "score", "build", "detect", "layout"),
    "export": ("ingest", "harvest", "build", "detect", "layout"),
}


def _check_dependencies(stage: str, config: PipelineConfig) -> None:
    paths = artifact_paths(config)
    for dep in STAGE_DEPS[stage]:
        for path in paths[dep].values():
            if not path.is_file():
                raise DependencyError(
                    f"stage {stage!r} needs {path.name} from stage {dep!r}; run {dep!r} first",
                    missing_stage=dep,
                )


# ---------------------------------------------------------------------------
# shared loading helpers

def _load_inputs(config: PipelineConfig):
    aliases = catalog.load_aliases(config.aliases_path) if config.aliases_path else {}
    paths = artifact_paths(config)
    keywords = catalog.read_keywords_csv(paths["ingest"]["keywords"])
    return aliases, keywords


def _load_store(config: PipelineConfig) -> openalex.HitStore:
    if not Path(config.cache_path).is_file():
        return openalex.HitStore()
    return openalex.HitStore.load(config.cache_path)


def _accepted_pairs(config, keywords, aliases):
    candidates = graph_mod.load_associations(config.associations_path, keywords, aliases)
    return [(c.keyword_a, c.keyword_b) for c in candidates if c.accepted], candidates


def _required_queries(config: PipelineConfig, keywords, pairs) -> list[str]:
    labels = {k.id: k.canonical for k in keywords}
    label_pairs = [(labels[a], labels[b]) for a, b in pairs]
    return [
        expr.render()
        for expr in openalex.plan_queries(
            [k.canonical for k in keywords], label_pairs, config.context
        )
    ]


def _read_relevance_csv(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _generated_at(store: openalex.HitStore) -> str:
    if not store.entries:
        return "1970-01-01T00:00:00Z"
    return max(r.fetched_at for r in store.entries.values())


# ---------------------------------------------------------------------------
# stage bodies

def _stage_ingest(config: PipelineConfig, transport) -> None:
    aliases = catalog.load_aliases(config.aliases_path) if config.aliases_path else {}
    records = catalog.parse_mentions(config.mentions_path)
    keywords, ranking = catalog.tally_mentions(records, aliases, config.threshold)
    paths = artifact_paths(config)["ingest"]
    catalog.write_keywords_csv(keywords, paths["keywords"])
    catalog.write_mention_ranking_csv(ranking, keywords, paths["mention_ranking"])


def _stage_harvest(config: PipelineConfig, transport) -> None:
    aliases, keywords = _load_inputs(config)
    pairs, _ = _accepted_pairs(config, keywords, aliases)
    store = _load_store(config)
    if config.mode == "offline":
        missing = [q for q in _required_queries(config, keywords, pairs) if q not in store]
        if missing:
            listing = "\n  ".join(missing[:20])
            suffix = "" if len(missing) <= 20 else f"\n  ... and {len(missing) - 20} more"
            raise ReplayError(
                f"offline harvest: {len(missing)} queries missing from cache:\n  {listing}{suffix}"
            )
        return  # cache already complete; leave the file untouched
    budget = openalex.RateBudget(
        requests_per_second=config.requests_per_second,
        max_requests=config.max_requests,
    )
    client = openalex.OpenAlexClient(
        store, mode="live", transport=transport, mailto=config.mailto, budget=budget
    )
    report = openalex.harvest(
        client, keywords, pairs, config.context, fail_fast=config.fail_fast
    )
    store.save(config.cache_path)
    if report.failures:
        summary = "; ".join(f"{q}: {err}" for q, err in report.failures[:5])
        raise TransportError(
            f"{len(report.failures)} queries failed during harvest: {summary}"
        )


def _stage_score(config: PipelineConfig, transport) -> None:
    _, keywords = _load_inputs(config)
    store = _load_store(config)
    openalex.validate_narrowing(store, lambda msg: print(f"warning: {msg}", file=sys.stderr))
    scores = relevance.compute_scores(
        keywords, store, config.context, config.boost_function
    )
    labels = {k.id: k.canonical for k in keywords}
    paths = artifact_paths(config)["score"]
    relevance.write_relevance_csv(scores, labels, paths["relevance"], top_n=None)
    relevance.write_relevance_csv(scores, labels, paths["relevance_top"], top_n=config.top_n)
    meta = {
        "boost_function": config.boost_function,
        "context": list(config.context),
        "h_c": scores[0].h_c if scores else None,
        "h_all": scores[0].h_all if scores else None,
        "note": "boost definition is swappable; ranking under 'lift' equals ranking by h_kc",
    }
    paths["relevance_meta"].write_text(
        json.dumps(meta, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def _stage_build(config: PipelineConfig, transport) -> None:
    aliases, keywords = _load_inputs(config)
    _, candidates = _accepted_pairs(config, keywords, aliases)
    store = _load_store(config)
    scores = relevance.compute_scores(
        keywords, store, config.context, config.boost_function
    )
    graph = graph_mod.build_graph(keywords, scores, store, candidates)
    paths = artifact_paths(config)["build"]
    graph_mod.write_nodes_csv(graph, paths["nodes"])
    graph_mod.write_edges_csv(graph, paths["edges"])
    isolated = graph_mod.isolated_keywords(keywords, graph)
    paths["isolated"].write_text(
        "keyword\n" + "".join(f"{label}\n" for label in isolated), encoding="utf-8"
    )


def _read_graph(config: PipelineConfig) -> graph_mod.KeywordGraph:
    paths = artifact_paths(config)["build"]
    return graph_mod.read_graph_csv(paths["nodes"], paths["edges"])


def _read_partition(config: PipelineConfig, graph) -> communities.Partition:
    paths = artifact_paths(config)["detect"]
    ids_by_label = {node.label: nid for nid, node in graph.nodes.items()}
    assignment = communities.read_partition_csv(paths["partition"], ids_by_label)
    meta = json.loads(paths["partition_meta"].read_text(encoding="utf-8"))
    return communities.Partition(
        assignment=assignment,
        community_count=meta["community_count"],
        q=meta["q"],
        resolution=meta["resolution"],
        seed=meta["seed"],
    )


def _stage_detect(config: PipelineConfig, transport) -> None:
    graph = _read_graph(config)
    partition = communities.louvain(graph, seed=config.seed, resolution=config.resolution)
    labels = {nid: node.label for nid, node in graph.nodes.items()}
    paths = artifact_paths(config)["detect"]
    communities.write_partition_csv(partition, labels, paths["partition"])
    communities.write_partition_meta(partition, paths["partition_meta"])


def _stage_layout(config: PipelineConfig, transport) -> None:
    graph = _read_graph(config)
    partition = _read_partition(config, graph)
    labels = {nid: node.label for nid, node in graph.nodes.items()}
    params = layout_mod.LayoutParams()
    paths = artifact_paths(config)["layout"]
    full = layout_mod.spring_layout(graph, seed=config.seed, params=params)
    layout_mod.write_layout_json(full, labels, paths["layout_network"])
    grouped = layout_mod.grouped_layout(graph, partition, seed=config.seed, params=params)
    layout_mod.write_layout_json(grouped, labels, paths["layout_communities"])


def _stage_render(config: PipelineConfig, transport) -> None:
    graph = _read_graph(config)
    partition = _read_partition(config, graph)
    ids_by_label = {node.label: nid for nid, node in graph.nodes.items()}
    paths = artifact_paths(config)
    style = render.StyleSpec(canvas=config.network_canvas)

    full = layout_mod.read_layout_json(paths["layout"]["layout_network"], ids_by_label)
    grouped = layout_mod.read_layout_json(
        paths["layout"]["layout_communities"], ids_by_label
    )
    out = paths["render"]
    out["network_svg"].write_text(
        render.render_network_svg(graph, full, partition, style, config.annotations),
        encoding="utf-8",
    )
    out["communities_svg"].write_text(
        render.render_network_svg(graph, grouped, partition, style), encoding="utf-8"
    )

    # Word clouds mirror the two published rankings: thresholded mention
    # counts, and the top-n relevance list.
    with open(paths["ingest"]["mention_ranking"], encoding="utf-8", newline="") as fh:
        mention_weights = {
            row["keyword"]: float(row["mentions"]) for row in csv.DictReader(fh)
        }
    out["wordcloud_mentions"].write_text(
        render.render_wordcloud_svg(
            mention_weights,
            canvas=config.wordcloud_canvas,
            min_font=config.wordcloud_min_font,
            max_font=config.wordcloud_max_font,
        ),
        encoding="utf-8",
    )
    relevance_weights = {
        row["keyword"]: float(row["score"])
        for row in _read_relevance_csv(paths["score"]["relevance_top"])
        if float(row["score"]) > 0
    }
    out["wordcloud_relevance"].write_text(
        render.render_wordcloud_svg(
            relevance_weights,
            canvas=config.wordcloud_canvas,
            min_font=config.wordcloud_min_font,
            max_font=config.wordcloud_max_font,
        ),
        encoding="utf-8",
    )


def _stage_export(config: PipelineConfig, transport) -> None:
    graph = _read_graph(config)
    partition = _read_partition(config, graph)
    ids_by_label = {node.label: nid for nid, node in graph.nodes.items()}
    paths = artifact_paths(config)
    layout = layout_mod.read_layout_json(paths["layout"]["layout_network"], ids_by_label)
    keywords = catalog.read_keywords_csv(paths["ingest"]["keywords"])
    mention_counts = {k.id: k.mention_count for k in keywords}
    store = _load_store(config)
    meta = {
        "generated_at": _generated_at(store),
        "seed": config.seed,
        "resolution": config.resolution,
        "boost_function": config.boost_function,
        "q": partition.q,
    }
    document = export_explorer_json(graph, layout, partition, mention_counts, meta)
    paths["export"]["explorer"].write_text(document, encoding="utf-8")


_STAGE_BODIES: dict[str, Callable[[PipelineConfig, Any], None]] = {
    "ingest": _stage_ingest,
    "harvest": _stage_harvest,
    "score": _stage_score,
    "build": _stage_build,
    "detect": _stage_detect,
    "layout": _stage_layout,
    "render": _stage_render,
    "export": _stage_export,
}


# ---------------------------------------------------------------------------
# hash gating

def _hash_file(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def _stage_input_files(stage: str, config: PipelineConfig) -> list[Path]:
    paths = artifact_paths(config)
    files = [Path(config.mentions_path)]
    if config.aliases_path:
        files.append(Path(config.aliases_path))
    if stage in ("harvest", "build"):
        files.append(Path(config.associations_path))
    if stage in ("score", "build", "export") and Path(config.cache_path).is_file():
        files.append(Path(config.cache_path))
    for dep in STAGE_DEPS[stage]:
        for path in paths[dep].values():
            if path.is_file():
                files.append(path)
    return files


def _config_hash(config: PipelineConfig) -> str:
    return hashlib.sha256(
        json.dumps(config.snapshot(), sort_keys=True).encode("utf-8")
    ).hexdigest()


def _stage_digest(stage: str, config: PipelineConfig) -> str:
    digest = hashlib.sha256()
    digest.update(stage.encode())
    digest.update(_config_hash(config).encode())
    for path in _stage_input_files(stage, config):
        digest.update(str(path.name).encode())
        digest.update(_hash_file(path).encode())
    return digest.hexdigest()


def _load_state(config: PipelineConfig) -> dict:
    state_path = Path(config.output_dir) / STATE_FILE
    if state_path.is_file():
        return json.loads(state_path.read_text(encoding="utf-8"))
    return {}


def _save_state(config: PipelineConfig, state: dict) -> None:
    state_path = Path(config.output_dir) / STATE_FILE
    state_path.parent.mkdir(parents=True, exist_ok=True)
    state_path.write_text(json.dumps(state, sort_keys=True, indent=1), encoding="utf-8")


# ---------------------------------------------------------------------------
# public entry point

def run_stage(
    stage: str,
    config: PipelineConfig,
    transport: openalex.Transport | None = None,
    force: bool = False,
) -> dict:
    """Run one stage (or "all"), returning a report of what ran or skipped."""
    if stage != "all" and stage not in STAGES:
        raise ConfigError(f"unknown stage {stage!r} (expected one of {', '.join(STAGES)} or all)")
    config.validate()
    stages = list(STAGES) if stage == "all" else [stage]
    out = Path(config.output_dir)
    for sub in ("rankings", "graph", "communities", "figures", "export"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    state = _load_state(config)
    report: dict[str, Any] = {
        "config_hash": _config_hash(config),
        "seed": config.seed,
        "stages": {},
        "input_hashes": {},
    }
    for name in stages:
        _check_dependencies(name, config)
        digest = _stage_digest(name, config)
        outputs = artifact_paths(config)[name].values()
        if not force and state.get(name) == digest and all(p.is_file() for p in outputs):
            report["stages"][name] = {"status": "skipped", "seconds": 0.0}
            continue
        started = time.perf_counter()
        _STAGE_BODIES[name](config, transport)
        elapsed = time.perf_counter() - started
        state[name] = _stage_digest(name, config)
        _save_state(config, state)
        report["stages"][name] = {"status": "ran", "seconds": round(elapsed, 4)}
    report["input_hashes"] = {
        str(p): _hash_file(p)
        for p in [
            Path(config.mentions_path),
            Path(config.associations_path),
        ]
        + ([Path(config.aliases_path)] if config.aliases_path else [])
        + ([Path(config.cache_path)] if Path(config.cache_path).is_file() else [])
    }
    (out / "run_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    (out / "config_resolved.json").write_text(
        json.dumps(config.snapshot(), sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return report
