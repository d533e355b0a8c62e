"""Generate the committed offline fixture under data/fixture/.

The fixture is a synthetic but structurally realistic dataset: 73 keywords
reaching the 3-mention threshold (plus a handful below it), an alias table,
a curated association list with four planted topical clusters, and a hit
cache covering every query the offline pipeline replays.  Counts are drawn
from a fixed seed and then verified against the properties the test suite
relies on; regenerating with the same seed reproduces identical bytes.

Usage:
    python tools/make_fixture.py [--out data/fixture] [--seed N] [--search K]
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from keyword_atlas import catalog, communities, graph as graph_mod, layout, openalex
from keyword_atlas import relevance, render

CONTEXT = ("complex systems", "complexity science")
H_ALL = 60_000_000
H_C = 300_000
DEFAULT_SEED = 2

GROUPS: dict[str, list[str]] = {
    "networks": [
        "networks", "graph theory", "small-world networks", "scale-free networks",
        "network topology", "social networks", "random graphs", "percolation",
        "centrality", "community detection", "network resilience",
        "epidemic spreading", "diffusion", "contagion", "preferential attachment",
        "assortativity", "multilayer networks", "temporal networks",
    ],
    "dynamics": [
        "chaos", "nonlinear dynamics", "bifurcation", "attractors", "fractals",
        "lyapunov exponents", "turbulence", "synchronization", "oscillations",
        "pattern formation", "limit cycles", "dynamical systems", "ergodicity",
        "time series", "instability", "feedback loops", "phase space",
        "sensitivity to initial conditions",
    ],
    "agents": [
        "agent-based modeling", "cellular automata", "game theory",
        "evolutionary dynamics", "swarm intelligence", "collective behavior",
        "artificial life", "machine learning", "genetic algorithms",
        "reinforcement learning", "multi-agent systems", "social simulation",
        "bounded rationality", "cooperation", "flocking", "optimization",
        "heuristics", "learning dynamics",
    ],
    "statistical": [
        "entropy", "self-organization", "emergence", "phase transitions",
        "criticality", "power laws", "statistical mechanics", "information theory",
        "complexity measures", "scaling laws", "self-organized criticality",
        "non-equilibrium systems", "stochastic processes", "fluctuations",
        "renormalization", "thermodynamics", "mutual information",
        "coarse-graining", "adaptation",
    ],
}

# Mentioned once or twice; stay out of the 73-keyword ranking.
EXTRAS = [
    "econophysics", "sociophysics", "systems biology", "cybernetics",
    "catastrophe theory", "tipping points", "morphogenesis",
]

ALIASES = [
    ("abm", "agent-based modeling"),
    ("agent based modelling", "agent-based modeling"),
    ("soc", "self-organized criticality"),
    ("small world networks", "small-world networks"),
    ("power law", "power laws"),
    ("ca", "cellular automata"),
    ("rl", "reinforcement learning"),
    ("self organisation", "self-organization"),
]

ORIGIN_PREFIX = {"social_media": "post", "books": "book", "online_resources": "web"}


def _surface_forms(label: str, alias_map: dict[str, list[str]]) -> list[str]:
    forms = [label, label.capitalize(), label.title(), f" {label} "]
    forms.extend(alias_map.get(label, []))
    return forms


def make_mentions(rng: np.random.Generator) -> list[tuple[str, str, str]]:
    alias_map: dict[str, list[str]] = {}
    for alias, canonical in ALIASES:
        alias_map.setdefault(canonical, []).append(alias)
        alias_map.setdefault(canonical, []).append(alias.upper())

    rows = []
    all_73 = [k for group in GROUPS.values() for k in group]
    for label in all_73:
        count = 3 + int(27 * rng.random() ** 2)
        forms = _surface_forms(label, alias_map)
        for _ in range(count):
            form = forms[rng.integers(0, len(forms))]
            source = catalog.SOURCES[rng.integers(0, len(catalog.SOURCES))]
            origin = f"{ORIGIN_PREFIX[source]}-{rng.integers(1, 500):03d}"
            rows.append((form, source, origin))
    for label in EXTRAS:
        for _ in range(int(rng.integers(1, 3))):
            source = catalog.SOURCES[rng.integers(0, len(catalog.SOURCES))]
            origin = f"{ORIGIN_PREFIX[source]}-{rng.integers(1, 500):03d}"
            rows.append((label, source, origin))
    order = rng.permutation(len(rows))
    return [rows[i] for i in order]


def make_counts(rng: np.random.Generator, labels: list[str], extras: list[str]):
    """Raw and context-conditioned hit counts per keyword label."""
    h_k: dict[str, int] = {}
    h_kc: dict[str, int] = {}
    for label in labels:
        raw = int(10 ** rng.uniform(5.1, 5.5))
        uplift = rng.uniform(0.06, 0.095)
        h_k[label] = raw
        h_kc[label] = max(1, int(raw * uplift))
    for label in extras:
        raw = int(rng.integers(15_000, 30_000))
        h_k[label] = raw
        h_kc[label] = int(rng.integers(30, 120))
    return h_k, h_kc


def make_associations(rng: np.random.Generator):
    """Accepted in-group rings plus chords, weak cross-group links, and a few
    rejected candidates.  Returns (rows, pair_hits_by_labels)."""
    rows: list[tuple[str, str, str, str]] = []
    pair_hits: dict[tuple[str, str], int] = {}
    seen: set[tuple[str, str]] = set()

    def add(a: str, b: str, accepted: bool, hits: int, note: str) -> None:
        key = tuple(sorted((a, b)))
        if key in seen:
            return
        seen.add(key)
        rows.append((a, b, "true" if accepted else "false", note))
        pair_hits[key] = hits

    for members in GROUPS.values():
        n = len(members)
        for i in range(n):
            a, b = members[i], members[(i + 1) % n]
            add(a, b, True, int(rng.integers(800, 2501)), "in-topic pair")
        chords = 0
        while chords < 16:
            i, j = rng.integers(0, n, 2)
            if i == j:
                continue
            a, b = members[int(i)], members[int(j)]
            if tuple(sorted((a, b))) in seen:
                continue
            add(a, b, True, int(rng.integers(800, 2501)), "in-topic pair")
            chords += 1

    group_names = list(GROUPS)
    bridges = [(0, 1), (1, 2), (2, 3), (0, 2), (1, 3), (0, 3)]
    for ga, gb in bridges:
        members_a, members_b = GROUPS[group_names[ga]], GROUPS[group_names[gb]]
        a = members_a[int(rng.integers(0, len(members_a)))]
        b = members_b[int(rng.integers(0, len(members_b)))]
        add(a, b, True, int(rng.integers(60, 181)), "cross-topic pair")

    rejected_notes = [
        "generic shared term, not a real association",
        "coincidental co-hits from a common phrase",
        "reviewed and declined: methods term, not topical",
    ]
    rejects = 0
    while rejects < 12:
        ga, gb = rng.integers(0, len(group_names), 2)
        members_a = GROUPS[group_names[int(ga)]]
        members_b = GROUPS[group_names[int(gb)]]
        a = members_a[int(rng.integers(0, len(members_a)))]
        b = members_b[int(rng.integers(0, len(members_b)))]
        if a == b or tuple(sorted((a, b))) in seen:
            continue
        add(a, b, False, int(rng.integers(1000, 20_000)),
            rejected_notes[rejects % len(rejected_notes)])
        rejects += 1
    return rows, pair_hits


def make_hit_store(
    labels: list[str],
    h_k: dict[str, int],
    h_kc: dict[str, int],
    pair_hits: dict[tuple[str, str], int],
) -> openalex.HitStore:
    store = openalex.HitStore()
    stamp = 0

    def put(query: str, count: int) -> None:
        nonlocal stamp
        minutes, seconds = divmod(stamp, 60)
        hours, minutes = divmod(minutes, 60)
        fetched = f"2025-11-05T{9 + hours:02d}:{minutes:02d}:{seconds:02d}Z"
        store.put(openalex.HitRecord(query=query, count=count, fetched_at=fetched))
        stamp += 1

    put(openalex.TOTAL_QUERY.render(), H_ALL)
    put(openalex.context_query(CONTEXT).render(), H_C)
    for label in sorted(labels):
        put(openalex.build_query(label).render(), h_k[label])
    for label in sorted(labels):
        put(openalex.build_query(label, context=CONTEXT).render(), h_kc[label])
    for a, b in sorted(pair_hits):
        put(openalex.build_query((a, b)).render(), pair_hits[(a, b)])
    return store


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def build(seed: int, out_dir: Path) -> dict:
    rng = np.random.default_rng(seed)
    mention_rows = make_mentions(rng)
    all_labels = [k for group in GROUPS.values() for k in group] + EXTRAS
    h_k, h_kc = make_counts(rng, all_labels[: len(all_labels) - len(EXTRAS)], EXTRAS)
    association_rows, pair_hits = make_associations(rng)
    store = make_hit_store(all_labels, h_k, h_kc, pair_hits)

    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "mentions.csv", ["keyword", "source", "origin"], mention_rows)
    write_csv(out_dir / "aliases.csv", ["alias", "canonical"], ALIASES)
    write_csv(
        out_dir / "associations.csv",
        ["keyword_a", "keyword_b", "accepted", "note"],
        association_rows,
    )
    store.save(out_dir / "hits.json")
    return verify(out_dir)


def verify(out_dir: Path) -> dict:
    """Recompute everything from the written files and check the properties
    the acceptance suite will assert."""
    aliases = catalog.load_aliases(out_dir / "aliases.csv")
    records = catalog.parse_mentions(out_dir / "mentions.csv")
    keywords, ranking = catalog.tally_mentions(records, aliases, threshold=3)
    store = openalex.HitStore.load(out_dir / "hits.json")
    scores = relevance.compute_scores(keywords, store, CONTEXT)
    candidates = graph_mod.load_associations(out_dir / "associations.csv", keywords, aliases)
    g = graph_mod.build_graph(keywords, scores, store, candidates)

    counts = Counter(
        communities.louvain(g, seed=s).community_count for s in range(20)
    )
    modal = counts.most_common(1)[0][0]

    result = layout.spring_layout(g, seed=42)
    weights = [e.weight for e in g.edges]

    labels = {k.id: k.canonical for k in keywords}
    mention_weights = {labels[kid]: float(c) for kid, c in ranking.entries}
    top = relevance.rank_by_relevance(scores, labels, top_n=73)
    relevance_weights = {labels[kid]: s for kid, s in top.entries}
    render.layout_wordcloud(mention_weights, canvas=(1200, 900), min_font=9, max_font=42)
    render.layout_wordcloud(relevance_weights, canvas=(1200, 900), min_font=9, max_font=42)

    ranked_set = {labels[kid] for kid, _ in ranking.entries}
    top73 = {labels[kid] for kid, _ in top.entries}
    return {
        "ranked": len(ranking),
        "keywords": len(keywords),
        "graph_nodes": len(g.nodes),
        "graph_edges": len(g.edges),
        "connected_73": len(ranked_set),
        "top73_is_ranked_set": top73 == ranked_set,
        "community_counts": dict(sorted(counts.items())),
        "modal_communities": modal,
        "layout_iterations": result.iterations,
        "layout_residual": result.residual,
        "weight_spread_log10": float(np.log10(max(weights) / min(weights))),
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/fixture", type=Path)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument(
        "--search", type=int, default=0,
        help="try this many seeds and report which satisfy all checks",
    )
    args = parser.parse_args()

    if args.search:
        for seed in range(args.search):
            try:
                report = build(seed, args.out)
            except Exception as exc:  # noqa: BLE001 - report and keep scanning
                print(f"seed {seed}: FAILED ({exc})")
                continue
            ok = (
                report["ranked"] == 73
                and report["modal_communities"] == 4
                and report["layout_residual"] <= 1e-3
                and report["top73_is_ranked_set"]
            )
            print(f"seed {seed}: {'OK ' if ok else 'no '} {report}")
        return 0

    report = build(args.seed, args.out)
    for key, value in report.items():
        print(f"{key}: {value}")
    ok = (
        report["ranked"] == 73
        and report["modal_communities"] == 4
        and report["layout_residual"] <= 1e-3
        and report["top73_is_ranked_set"]
    )
    if not ok:
        print("fixture checks FAILED", file=sys.stderr)
        return 1
    print("fixture checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
