"""keyword_atlas: a keyword-association atlas for a research field.

Curated keyword mentions are tallied into a frequency ranking; literature
hit counts turn them into relevance scores, a weighted association network,
communities, force-directed layouts, SVG figures, and a JSON export for
interactive exploration.
"""

from .catalog import (
    Keyword,
    MentionRecord,
    load_aliases,
    normalize_keyword,
    parse_mentions,
    rank_by_mentions,
    tally_mentions,
)
from .communities import Partition, louvain, modularity
from .errors import AtlasError
from .export import export_explorer_json, parse_export
from .graph import AssociationCandidate, KeywordGraph, build_graph, load_associations
from .layout import LayoutParams, grouped_layout, spring_layout
from .openalex import HitStore, OpenAlexClient, build_query, harvest, plan_queries
from .pipeline import PipelineConfig, load_config, run_stage
from .relevance import compute_scores, rank_by_relevance, visibility_boost
from .render import StyleSpec, layout_wordcloud, render_network_svg, render_wordcloud_svg

__version__ = "0.1.0"

__all__ = [
    "AssociationCandidate",
    "AtlasError",
    "HitStore",
    "Keyword",
    "KeywordGraph",
    "LayoutParams",
    "MentionRecord",
    "OpenAlexClient",
    "Partition",
    "PipelineConfig",
    "StyleSpec",
    "__version__",
    "build_graph",
    "build_query",
    "compute_scores",
    "export_explorer_json",
    "grouped_layout",
    "harvest",
    "layout_wordcloud",
    "load_aliases",
    "load_associations",
    "load_config",
    "louvain",
    "modularity",
    "normalize_keyword",
    "parse_export",
    "parse_mentions",
    "plan_queries",
    "rank_by_mentions",
    "rank_by_relevance",
    "render_network_svg",
    "render_wordcloud_svg",
    "run_stage",
    "spring_layout",
    "tally_mentions",
    "visibility_boost",
]
