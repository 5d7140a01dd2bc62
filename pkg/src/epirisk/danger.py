"""Per-division hotspot danger scores over the threshold graph.

Three measures are provided.  ``nwos`` averages the distance-discounted
caseload of a division's neighbors; ``nws`` additionally folds in the
division's own caseload and its day-over-day growth; ``isl`` averages an
inverse-square interaction term, so mutual risk falls off with the square
of the separation, the way field strength does in Coulomb's law.

All case and distance quantities enter as ratios against their dataset
maxima, which makes every score unit-free: rescaling all case counts by a
common factor, or all distances by a common factor, changes nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .geograph import EpiGraph
from .model import ConfigError, DivisionKey

NWOS = "nwos"
NWS = "nws"
ISL = "isl"
MEASURES = (NWOS, NWS, ISL)

NodeScale = Mapping[DivisionKey, float]
EdgeScale = Mapping[tuple[DivisionKey, DivisionKey], float]


@dataclass(frozen=True)
class DangerVector:
    """Raw danger value for every node of a graph under one measure."""

    measure: str
    values: Mapping[DivisionKey, float]
    max_v: int
    max_e: float


def scale_weights(graph: EpiGraph) -> tuple[dict[DivisionKey, float], dict[tuple[DivisionKey, DivisionKey], float]]:
    """Node and edge weights divided by their dataset maxima.

    Node scales lie in [0, 1] (all zero when no division has cases); edge
    scales lie in (0, 1] and are keyed by ordered key pair, present in both
    directions.  An empty edge set yields an empty edge-scale map.
    """
    max_v = max((d.active for d in graph.nodes), default=0)
    if max_v > 0:
        node_scale = {d.key: d.active / max_v for d in graph.nodes}
    else:
        node_scale = {d.key: 0.0 for d in graph.nodes}

    edges = graph.edges()
    edge_scale: dict[tuple[DivisionKey, DivisionKey], float] = {}
    if edges:
        max_e = max(dist for _, _, dist in edges)
        for a, b, dist in edges:
            scaled = dist / max_e
            edge_scale[(a, b)] = scaled
            edge_scale[(b, a)] = scaled
    return node_scale, edge_scale


def impact(
    i: DivisionKey,
    j: DivisionKey,
    node_scale: NodeScale,
    edge_scale: EdgeScale,
) -> float:
    """Contribution of neighbor ``j`` to ``i``: scaled caseload over scaled distance."""
    return node_scale[j] / edge_scale[(i, j)]


def impact_isl(
    i: DivisionKey,
    j: DivisionKey,
    node_scale: NodeScale,
    edge_scale: EdgeScale,
) -> float:
    """Inverse-square interaction of ``i`` and ``j``; symmetric in its arguments."""
    e = edge_scale[(i, j)]
    return node_scale[i] * node_scale[j] / (e * e)


def impact_self(i: DivisionKey, graph: EpiGraph, node_scale: NodeScale) -> float:
    """A division's own contribution: scaled caseload times its growth factor.

    Zero when the division has no active cases.  The growth multiplier is
    floored at zero so a large drop in cases cannot push danger negative.
    """
    division = graph.division(i)
    if division.active == 0:
        return 0.0
    growth = 1.0 + division.delta_active / division.active
    return node_scale[i] * max(0.0, growth)


def d_nwos(i: DivisionKey, graph: EpiGraph, node_scale: NodeScale, edge_scale: EdgeScale) -> float:
    """Mean neighbor impact; 0 for an isolated node."""
    neighbors = graph.neighbors(i)
    if not neighbors:
        return 0.0
    total = 0.0
    for j, _ in neighbors:
        total += impact(i, j, node_scale, edge_scale)
    return total / len(neighbors)


def d_nws(i: DivisionKey, graph: EpiGraph, node_scale: NodeScale, edge_scale: EdgeScale) -> float:
    """Mean impact over the neighbors plus the division itself."""
    neighbors = graph.neighbors(i)
    total = 0.0
    for j, _ in neighbors:
        total += impact(i, j, node_scale, edge_scale)
    total += impact_self(i, graph, node_scale)
    return total / (len(neighbors) + 1)


def d_isl(i: DivisionKey, graph: EpiGraph, node_scale: NodeScale, edge_scale: EdgeScale) -> float:
    """Mean inverse-square interaction with the neighbors; 0 for an isolated node."""
    neighbors = graph.neighbors(i)
    if not neighbors:
        return 0.0
    total = 0.0
    for j, _ in neighbors:
        total += impact_isl(i, j, node_scale, edge_scale)
    return total / len(neighbors)


_MEASURE_FN = {NWOS: d_nwos, NWS: d_nws, ISL: d_isl}


def score_all(graph: EpiGraph, measure: str) -> DangerVector:
    """Apply one measure to every node of the graph.

    Results are independent of node iteration order: each node is scored
    from its own sorted adjacency list only.
    """
    try:
        fn = _MEASURE_FN[measure]
    except KeyError:
        raise ConfigError(f"unknown measure {measure!r}; expected one of {MEASURES}") from None
    node_scale, edge_scale = scale_weights(graph)
    values = {d.key: fn(d.key, graph, node_scale, edge_scale) for d in graph.nodes}
    max_v = max((d.active for d in graph.nodes), default=0)
    max_e = max((dist for _, _, dist in graph.edges()), default=0.0)
    return DangerVector(measure=measure, values=values, max_v=max_v, max_e=max_e)


def danger_to_dict(danger: DangerVector) -> dict:
    """Serializable form of a danger vector, values keyed by division id."""
    return {
        "measure": danger.measure,
        "max_v": danger.max_v,
        "max_e": danger.max_e,
        "values": {
            key.to_id(): value
            for key, value in sorted(danger.values.items())
        },
    }


def danger_from_dict(payload: dict) -> DangerVector:
    try:
        measure = payload["measure"]
        raw_values = payload["values"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"danger payload missing field: {exc}") from exc
    if measure not in MEASURES:
        raise ConfigError(f"unknown measure {measure!r} in danger payload")
    values = {DivisionKey.from_id(raw): float(v) for raw, v in raw_values.items()}
    return DangerVector(
        measure=measure,
        values=values,
        max_v=int(payload.get("max_v", 0)),
        max_e=float(payload.get("max_e", 0.0)),
    )
