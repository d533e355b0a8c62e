"""SVG rendering: community-colored network diagrams and word clouds.

All output is built from sorted inputs with fixed number formatting, so a
given (graph, layout, partition, style) always produces identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping
from xml.sax.saxutils import escape

from .communities import Partition
from .errors import ContractError, PlacementError
from .graph import KeywordGraph
from .layout import LayoutResult

#: Community colors in Fig-3 order: orange, yellow, purple, green (cycled).
DEFAULT_PALETTE = ("#e69f00", "#f0e442", "#cc79a7", "#009e73")

# Crude text metrics for a generic sans-serif face; used for both word-cloud
# collision boxes and canvas fitting.
CHAR_WIDTH = 0.62
LINE_HEIGHT = 1.12


@dataclass(frozen=True)
class StyleSpec:
    """Visual encoding rules for the network diagrams."""

    palette: tuple[str, ...] = DEFAULT_PALETTE
    min_radius: float = 5.0
    max_radius: float = 20.0
    min_edge_width: float = 0.5
    max_edge_width: float = 4.0
    label_size: float | None = None  # None: labels scale with node radius
    canvas: tuple[int, int] = (1280, 960)
    margin: float = 60.0
    background: str = "#ffffff"
    edge_color: str = "#9a9a9a"

    def color(self, community: int) -> str:
        return self.palette[community % len(self.palette)]


@dataclass(frozen=True)
class Annotation:
    """A hand-placed arrow with a caption, in layout coordinates.

    The diagrams carry no computed interpretive marks; arrows like "more
    applied toward the lower left" are authored by a person and passed
    through verbatim.
    """

    x: float
    y: float
    dx: float
    dy: float
    text: str = ""


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".") or "0"


def node_radius(score: float, lo: float, hi: float, style: StyleSpec) -> float:
    """Radius strictly monotone in score (sqrt scaling, so area tracks score)."""
    if hi <= lo:
        return (style.min_radius + style.max_radius) / 2.0
    t = (math.sqrt(max(score, 0.0)) - math.sqrt(max(lo, 0.0))) / (
        math.sqrt(hi) - math.sqrt(max(lo, 0.0))
    )
    return style.min_radius + (style.max_radius - style.min_radius) * t


def edge_width(weight: float, lo: float, hi: float, style: StyleSpec) -> float:
    if hi <= lo:
        return (style.min_edge_width + style.max_edge_width) / 2.0
    t = (weight - lo) / (hi - lo)
    return style.min_edge_width + (style.max_edge_width - style.min_edge_width) * t


def _fit_transform(bounds, canvas, margin):
    """Map layout coordinates into the canvas, preserving aspect ratio."""
    xmin, ymin, xmax, ymax = bounds
    span_x = max(xmax - xmin, 1e-9)
    span_y = max(ymax - ymin, 1e-9)
    scale = min((canvas[0] - 2 * margin) / span_x, (canvas[1] - 2 * margin) / span_y)
    cx, cy = (xmin + xmax) / 2.0, (ymin + ymax) / 2.0

    def transform(x: float, y: float) -> tuple[float, float]:
        return (
            canvas[0] / 2.0 + (x - cx) * scale,
            canvas[1] / 2.0 + (y - cy) * scale,
        )

    return transform


def render_network_svg(
    graph: KeywordGraph,
    layout: LayoutResult,
    partition: Partition,
    style: StyleSpec | None = None,
    annotations: Iterable[Annotation] = (),
) -> str:
    """Render the graph as an SVG document string.

    One circle per node (community color, score-scaled radius), one line per
    edge (weight-scaled stroke), one label per node, plus any hand-specified
    annotation arrows.
    """
    style = style or StyleSpec()
    missing = set(graph.nodes) - set(layout.positions)
    if missing or set(partition.assignment) != set(graph.nodes):
        raise ContractError("layout and partition must cover the graph's node set")

    transform = _fit_transform(layout.bounds, style.canvas, style.margin)
    scores = [graph.nodes[n].score for n in graph.node_ids]
    s_lo, s_hi = (min(scores), max(scores)) if scores else (0.0, 0.0)
    weights = [e.weight for e in graph.edges]
    w_lo, w_hi = (min(weights), max(weights)) if weights else (0.0, 0.0)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.canvas[0]}" '
        f'height="{style.canvas[1]}" viewBox="0 0 {style.canvas[0]} {style.canvas[1]}">',
        f'<rect width="100%" height="100%" fill="{style.background}"/>',
        '<g stroke-linecap="round">',
    ]
    for e in graph.edges:
        x1, y1 = transform(*layout.positions[e.a])
        x2, y2 = transform(*layout.positions[e.b])
        width = edge_width(e.weight, w_lo, w_hi, style)
        lines.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{style.edge_color}" stroke-width="{_fmt(width)}" stroke-opacity="0.55"/>'
        )
    lines.append("</g>")
    lines.append("<g>")
    for nid in graph.node_ids:
        x, y = transform(*layout.positions[nid])
        r = node_radius(graph.nodes[nid].score, s_lo, s_hi, style)
        color = style.color(partition.assignment[nid])
        lines.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" fill="{color}" '
            f'stroke="#555555" stroke-width="0.6"/>'
        )
    lines.append("</g>")
    lines.append('<g font-family="sans-serif" fill="#1a1a1a" text-anchor="middle">')
    for nid in graph.node_ids:
        x, y = transform(*layout.positions[nid])
        r = node_radius(graph.nodes[nid].score, s_lo, s_hi, style)
        size = style.label_size if style.label_size is not None else max(8.0, r * 0.85)
        lines.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y - r - 3.0)}" font-size="{_fmt(size)}">'
            f"{escape(graph.nodes[nid].label)}</text>"
        )
    lines.append("</g>")
    for note in annotations:
        lines.append(_render_annotation(note, transform))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _render_annotation(note: Annotation, transform) -> str:
    x1, y1 = transform(note.x, note.y)
    x2, y2 = transform(note.x + note.dx, note.y + note.dy)
    angle = math.atan2(y2 - y1, x2 - x1)
    head = 10.0
    left = (
        x2 - head * math.cos(angle - 0.4),
        y2 - head * math.sin(angle - 0.4),
    )
    right = (
        x2 - head * math.cos(angle + 0.4),
        y2 - head * math.sin(angle + 0.4),
    )
    parts = [
        '<g stroke="#333333" fill="#333333">',
        f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" stroke-width="2"/>',
        f'<polygon points="{_fmt(x2)},{_fmt(y2)} {_fmt(left[0])},{_fmt(left[1])} '
        f'{_fmt(right[0])},{_fmt(right[1])}"/>',
    ]
    if note.text:
        parts.append(
            f'<text x="{_fmt(x1)}" y="{_fmt(y1 - 6.0)}" font-family="sans-serif" '
            f'font-size="14" stroke="none" text-anchor="middle">{escape(note.text)}</text>'
        )
    parts.append("</g>")
    return "\n".join(parts)


@dataclass(frozen=True)
class PlacedWord:
    label: str
    weight: float
    font: float
    x: float  # center
    y: float
    box: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax


def wordcloud_font_sizes(
    weights: Mapping[str, float], min_font: float, max_font: float
) -> dict[str, float]:
    """Font sizes proportional to sqrt(weight), clamped into [min, max].

    The largest weight maps exactly to max_font before clamping, so the
    pre-clamp sizes of any two words stay in sqrt-weight ratio.
    """
    if not weights:
        raise ContractError("word cloud needs at least one label")
    if any(w <= 0 for w in weights.values()):
        raise ContractError("word cloud weights must be positive")
    top = math.sqrt(max(weights.values()))
    return {
        label: min(max(max_font * math.sqrt(w) / top, min_font), max_font)
        for label, w in weights.items()
    }


def _word_box(label: str, font: float, x: float, y: float) -> tuple[float, float, float, float]:
    w = CHAR_WIDTH * font * max(len(label), 1)
    h = LINE_HEIGHT * font
    return (x - w / 2.0, y - h / 2.0, x + w / 2.0, y + h / 2.0)


def _overlaps(a, b, gap: float) -> bool:
    return (
        a[0] - gap < b[2] and b[0] - gap < a[2] and a[1] - gap < b[3] and b[1] - gap < a[3]
    )


def layout_wordcloud(
    weights: Mapping[str, float],
    canvas: tuple[int, int] = (1000, 700),
    min_font: float = 11.0,
    max_font: float = 54.0,
    gap: float = 2.0,
) -> list[PlacedWord]:
    """Place words largest-first along an outward spiral without overlaps.

    Deterministic: words are ordered by weight (label as tie-break) and walk
    a fixed Archimedean spiral from the canvas center.  A label that cannot
    fit anywhere raises PlacementError naming it.
    """
    fonts = wordcloud_font_sizes(weights, min_font, max_font)
    order = sorted(weights, key=lambda label: (-weights[label], label))
    cx, cy = canvas[0] / 2.0, canvas[1] / 2.0
    max_radius = math.hypot(canvas[0], canvas[1]) / 2.0
    placed: list[PlacedWord] = []

    for label in order:
        font = fonts[label]
        box = _word_box(label, font, cx, cy)
        if box[2] - box[0] > canvas[0] or box[3] - box[1] > canvas[1]:
            raise PlacementError(
                f"label {label!r} does not fit the canvas even at font {font:.1f}"
            )
        spot = None
        theta = 0.0
        pitch = 1.4  # radius gained per radian; one turn advances ~8.8 px
        # aspect-stretched spiral, stepped by roughly constant arc length so
        # probe density does not thin out at large radius
        arc_step = max(3.0, 0.3 * font)
        while True:
            r = pitch * theta
            x = cx + r * math.cos(theta) * (canvas[0] / canvas[1])
            y = cy + r * math.sin(theta)
            box = _word_box(label, font, x, y)
            inside = (
                box[0] >= 0 and box[1] >= 0 and box[2] <= canvas[0] and box[3] <= canvas[1]
            )
            if inside and not any(_overlaps(box, p.box, gap) for p in placed):
                spot = (x, y, box)
                break
            if r > max_radius:
                break
            theta += arc_step / max(r, arc_step)
        if spot is None:
            raise PlacementError(f"no free spot on canvas for label {label!r}")
        placed.append(
            PlacedWord(label=label, weight=weights[label], font=font, x=spot[0], y=spot[1], box=spot[2])
        )
    return placed


def render_wordcloud_svg(
    weights: Mapping[str, float],
    canvas: tuple[int, int] = (1000, 700),
    min_font: float = 11.0,
    max_font: float = 54.0,
    palette: tuple[str, ...] = DEFAULT_PALETTE,
    background: str = "#ffffff",
) -> str:
    """Render a word cloud as an SVG document string."""
    placed = layout_wordcloud(weights, canvas, min_font, max_font)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{canvas[0]}" height="{canvas[1]}" '
        f'viewBox="0 0 {canvas[0]} {canvas[1]}">',
        f'<rect width="100%" height="100%" fill="{background}"/>',
        '<g font-family="sans-serif" text-anchor="middle">',
    ]
    for i, word in enumerate(placed):
        color = palette[i % len(palette)]
        baseline = word.y + word.font * 0.35  # optical centering
        lines.append(
            f'<text x="{_fmt(word.x)}" y="{_fmt(baseline)}" font-size="{_fmt(word.font)}" '
            f'fill="{color}">{escape(word.label)}</text>'
        )
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
