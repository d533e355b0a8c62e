"""Force-directed layouts: spring attraction along edges, inverse-square
repulsion between all node pairs.

Edge weights are rescaled to [0, 1] by max-weight division before the forces
are evaluated, so the force constants do not depend on the weight scale of a
particular graph.  Integration is an energy-descent loop: a step is accepted
only if the total layout energy does not increase, which makes the energy
trace monotone and the final state reproducible bit-for-bit from
(graph, seed, params).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .communities import Partition
from .errors import ContractError
from .graph import GraphEdge, KeywordGraph


@dataclass(frozen=True)
class StepSchedule:
    """How the step size evolves: curvature-adaptive, or cool multiplicatively.

    The adaptive mode (default) picks the Barzilai-Borwein spectral step from
    the last position/force change, backtracking (halving) whenever a step
    would raise the energy; it grows the step instead when the curvature
    estimate is unusable.  The cooling mode keeps a fixed step and shrinks
    the displacement cap by a constant factor every iteration, the classic
    annealing schedule; it is retained as an option but converges far more
    slowly on stiff graphs.
    """

    mode: str = "adaptive"  # "adaptive" | "cooling"
    initial: float = 0.05
    growth: float = 1.1
    shrink: float = 0.5
    cooling: float = 0.995

    def __post_init__(self):
        if self.mode not in ("adaptive", "cooling"):
            raise ContractError(f"unknown step schedule mode {self.mode!r}")


@dataclass(frozen=True)
class LayoutParams:
    spring_constant: float = 1.0
    natural_length: float = 1.0
    repulsion_constant: float = 1.0
    step_schedule: StepSchedule = field(default_factory=StepSchedule)
    max_iterations: int = 10000
    residual_tolerance: float = 1e-3
    max_step: float = 1.0  # per-node displacement cap, in layout units


@dataclass(frozen=True)
class LayoutResult:
    """Node coordinates plus the convergence state they were produced with."""

    positions: dict[int, tuple[float, float]]
    seed: int
    iterations: int
    residual: float
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    energy_trace: tuple[float, ...] | None = None


def _bounds(points: np.ndarray) -> tuple[float, float, float, float]:
    return (
        float(points[:, 0].min()),
        float(points[:, 1].min()),
        float(points[:, 0].max()),
        float(points[:, 1].max()),
    )


def _normalized_edges(graph: KeywordGraph, index: Mapping[int, int]):
    if not graph.edges:
        return np.zeros((0, 2), dtype=int), np.zeros(0)
    max_w = max(e.weight for e in graph.edges)
    pairs = np.array([(index[e.a], index[e.b]) for e in graph.edges], dtype=int)
    weights = np.array([e.weight / max_w for e in graph.edges])
    return pairs, weights


def _separation_vectors(positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise difference vectors and distances, with coincident pairs nudged
    apart along a deterministic index-derived direction instead of erroring."""
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    n = positions.shape[0]
    tiny = dist < 1e-9
    np.fill_diagonal(tiny, False)
    if tiny.any():
        for i, j in zip(*np.nonzero(tiny)):
            angle = 2.0 * math.pi * (((int(i) * 2654435761 + int(j) * 40503) % 4096) / 4096.0)
            diff[i, j] = (1e-6 * math.cos(angle), 1e-6 * math.sin(angle))
        dist = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(dist, 1.0)  # diagonal never used
    return diff, dist


def net_forces(
    graph: KeywordGraph, positions: Mapping[int, tuple[float, float]], params: LayoutParams
) -> dict[int, tuple[float, float]]:
    """Net force on every node at the given positions (public for testing)."""
    order = graph.node_ids
    index = {nid: i for i, nid in enumerate(order)}
    pts = np.array([positions[nid] for nid in order], dtype=float)
    pairs, weights = _normalized_edges(graph, index)
    forces = _forces_array(pts, pairs, weights, params)
    return {nid: (float(f[0]), float(f[1])) for nid, f in zip(order, forces)}


def _forces_array(
    pts: np.ndarray, pairs: np.ndarray, weights: np.ndarray, params: LayoutParams
) -> np.ndarray:
    n = pts.shape[0]
    forces = np.zeros_like(pts)
    if n > 1:
        diff, dist = _separation_vectors(pts)
        rep = params.repulsion_constant * diff / dist[:, :, None] ** 3
        idx = np.arange(n)
        rep[idx, idx] = 0.0
        forces += rep.sum(axis=1)
    if len(pairs):
        delta = pts[pairs[:, 0]] - pts[pairs[:, 1]]
        d = np.sqrt((delta**2).sum(axis=1))
        d = np.where(d < 1e-9, 1e-9, d)
        # Hookean pull toward the rest length, scaled by normalized weight
        magnitude = params.spring_constant * weights * (d - params.natural_length)
        unit = delta / d[:, None]
        pull = magnitude[:, None] * unit
        np.add.at(forces, pairs[:, 0], -pull)
        np.add.at(forces, pairs[:, 1], pull)
    return forces


def _energy(pts: np.ndarray, pairs: np.ndarray, weights: np.ndarray, params: LayoutParams) -> float:
    total = 0.0
    n = pts.shape[0]
    if n > 1:
        _, dist = _separation_vectors(pts)
        iu = np.triu_indices(n, k=1)
        total += float((params.repulsion_constant / dist[iu]).sum())
    if len(pairs):
        delta = pts[pairs[:, 0]] - pts[pairs[:, 1]]
        d = np.sqrt((delta**2).sum(axis=1))
        total += float(
            (0.5 * params.spring_constant * weights * (d - params.natural_length) ** 2).sum()
        )
    return total


def spring_layout(
    graph: KeywordGraph,
    seed: int | np.random.SeedSequence,
    params: LayoutParams | None = None,
    record_energy: bool = False,
) -> LayoutResult:
    """Lay out the graph by force equilibrium, deterministically from the seed.

    Stops when the largest per-node net force drops to the residual tolerance
    or the iteration budget runs out; the result carries whichever residual
    and iteration count were reached.
    """
    params = params or LayoutParams()
    order = graph.node_ids
    if not order:
        raise ContractError("cannot lay out an empty graph")
    seed_value = seed if isinstance(seed, int) else -1
    if len(order) == 1:
        return LayoutResult(
            positions={order[0]: (0.0, 0.0)},
            seed=seed_value,
            iterations=0,
            residual=0.0,
            bounds=(0.0, 0.0, 0.0, 0.0),
            energy_trace=(0.0,) if record_energy else None,
        )

    index = {nid: i for i, nid in enumerate(order)}
    pairs, weights = _normalized_edges(graph, index)
    rng = np.random.default_rng(seed)
    spread = params.natural_length * math.sqrt(len(order))
    pts = rng.uniform(-spread / 2.0, spread / 2.0, size=(len(order), 2))

    schedule = params.step_schedule
    step = schedule.initial
    cap = params.max_step
    energy = _energy(pts, pairs, weights, params)
    trace = [energy]
    forces = _forces_array(pts, pairs, weights, params)
    residual = float(np.sqrt((forces**2).sum(axis=1)).max())
    prev_pts: np.ndarray | None = None
    prev_forces: np.ndarray | None = None
    iterations = 0
    for it in range(params.max_iterations):
        if residual <= params.residual_tolerance:
            break
        iterations = it + 1
        if schedule.mode == "adaptive" and prev_pts is not None:
            dx = (pts - prev_pts).ravel()
            dy = (prev_forces - forces).ravel()  # gradient difference; g = -F
            denom = float(dx @ dy)
            if denom > 1e-30:
                step = float(dx @ dx) / denom
            else:
                step *= schedule.growth
            step = min(max(step, 1e-12), 1e3)
        accepted = False
        candidate = pts
        new_energy = energy
        while step >= 1e-18:
            disp = step * forces
            norms = np.sqrt((disp**2).sum(axis=1))
            over = norms > cap
            if over.any():
                disp[over] *= (cap / norms[over])[:, None]
            candidate = pts + disp
            new_energy = _energy(candidate, pairs, weights, params)
            if new_energy <= energy + 1e-12 * (1.0 + abs(energy)):
                accepted = True
                break
            if schedule.mode != "adaptive":
                break
            step *= schedule.shrink
        if schedule.mode == "cooling":
            cap *= schedule.cooling
            if not accepted:
                continue  # skip the uphill move; a cooler cap may succeed
        elif not accepted:
            break  # no downhill step left above the floor
        prev_pts, prev_forces = pts, forces
        pts = candidate
        energy = new_energy
        trace.append(energy)
        forces = _forces_array(pts, pairs, weights, params)
        residual = float(np.sqrt((forces**2).sum(axis=1)).max())

    positions = {nid: (float(pts[i, 0]), float(pts[i, 1])) for nid, i in index.items()}
    return LayoutResult(
        positions=positions,
        seed=seed_value,
        iterations=iterations,
        residual=residual,
        bounds=_bounds(pts),
        energy_trace=tuple(trace) if record_energy else None,
    )


def _induced_subgraph(graph: KeywordGraph, members: list[int]) -> KeywordGraph:
    member_set = set(members)
    nodes = {nid: graph.nodes[nid] for nid in members}
    edges = [e for e in graph.edges if e.a in member_set and e.b in member_set]
    return KeywordGraph(nodes=nodes, edges=edges)


def grouped_layout(
    graph: KeywordGraph,
    partition: Partition,
    seed: int,
    params: LayoutParams | None = None,
) -> LayoutResult:
    """Lay out each community separately and arrange them on a near-square grid.

    Communities are placed row-major in community-id order; cells are sized to
    the largest community box, so community bounding boxes never overlap.
    """
    params = params or LayoutParams()
    if set(partition.assignment) != set(graph.nodes):
        raise ContractError("partition must cover exactly the graph's node set")
    groups = [
        (c, members) for c, members in sorted(partition.members().items()) if members
    ]
    if len(groups) == 1:
        return spring_layout(graph, seed, params)

    results = []
    for c, members in groups:
        sub = _induced_subgraph(graph, members)
        sub_seed = np.random.SeedSequence(seed, spawn_key=(c,))
        results.append((c, spring_layout(sub, sub_seed, params)))

    pad = 2.0 * params.natural_length
    widths = [r.bounds[2] - r.bounds[0] for _, r in results]
    heights = [r.bounds[3] - r.bounds[1] for _, r in results]
    cell_w = max(widths) + pad
    cell_h = max(heights) + pad
    cols = math.ceil(math.sqrt(len(groups)))

    positions: dict[int, tuple[float, float]] = {}
    boxes = []
    for slot, (c, result) in enumerate(results):
        row, col = divmod(slot, cols)
        cx = col * cell_w
        cy = row * cell_h
        bx = (result.bounds[0] + result.bounds[2]) / 2.0
        by = (result.bounds[1] + result.bounds[3]) / 2.0
        dx, dy = cx - bx, cy - by
        for nid, (x, y) in result.positions.items():
            positions[nid] = (x + dx, y + dy)
        boxes.append(
            (
                result.bounds[0] + dx,
                result.bounds[1] + dy,
                result.bounds[2] + dx,
                result.bounds[3] + dy,
            )
        )

    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if _boxes_overlap(boxes[i], boxes[j]):
                raise ContractError("community bounding boxes overlap")

    pts = np.array(list(positions.values()))
    return LayoutResult(
        positions=positions,
        seed=seed,
        iterations=max(r.iterations for _, r in results),
        residual=max(r.residual for _, r in results),
        bounds=_bounds(pts),
    )


def _boxes_overlap(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def write_layout_json(result: LayoutResult, labels: Mapping[int, str], path: str | Path) -> None:
    payload = {
        "seed": result.seed,
        "iterations": result.iterations,
        "residual": result.residual,
        "bounds": list(result.bounds),
        "positions": {
            labels[nid]: [x, y] for nid, (x, y) in sorted(result.positions.items())
        },
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def read_layout_json(path: str | Path, ids_by_label: Mapping[str, int]) -> LayoutResult:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    positions = {
        ids_by_label[label]: (xy[0], xy[1]) for label, xy in payload["positions"].items()
    }
    return LayoutResult(
        positions=positions,
        seed=payload["seed"],
        iterations=payload["iterations"],
        residual=payload["residual"],
        bounds=tuple(payload["bounds"]),
    )
