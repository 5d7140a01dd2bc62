"""Threshold-connected weighted graph over division centers.

Two divisions are joined by an edge when the distance between their
centers is at or below a connection threshold; the edge weight is that
distance.  Neighbor discovery runs on a uniform grid index sized to the
threshold, and a literal all-pairs sweep is kept alongside as the slow
reference implementation the grid must agree with exactly.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .model import ConfigError, DataError, Division, DivisionKey, GeoPoint

DEGREE_EUCLIDEAN = "degree-euclidean"
HAVERSINE_KM = "haversine-km"
METRICS = (DEGREE_EUCLIDEAN, HAVERSINE_KM)

EARTH_RADIUS_KM = 6371.0
# Ground length of one degree of latitude is ~111.195 km at this radius;
# dividing by the slightly smaller constant keeps grid cells at least one
# threshold wide.
KM_PER_DEGREE = 111.19
# Longitude cells grow by 1/cos(lat) toward the poles, capped at this factor.
MAX_LON_WIDENING = 5.0

# Below this separation two centers are treated as coincident bad data.
COINCIDENT_EPS = 1e-9

Edge = tuple[DivisionKey, DivisionKey, float]


def distance(a: GeoPoint, b: GeoPoint, metric: str = DEGREE_EUCLIDEAN) -> float:
    """Distance between two points.

    ``degree-euclidean`` is the plain euclidean distance on raw
    (lat, lon) values; ``haversine-km`` is the great-circle distance in
    kilometres.
    """
    if metric == DEGREE_EUCLIDEAN:
        dlat = a.lat - b.lat
        dlon = a.lon - b.lon
        return math.sqrt(dlat * dlat + dlon * dlon)
    if metric == HAVERSINE_KM:
        return _haversine_km(a.lat, a.lon, b.lat, b.lon)
    raise ConfigError(f"unknown metric {metric!r}; expected one of {METRICS}")


def _haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    half_dphi = (phi2 - phi1) / 2.0
    half_dlam = (math.radians(lon2) - math.radians(lon1)) / 2.0
    sp = math.sin(half_dphi)
    sl = math.sin(half_dlam)
    h = sp * sp + math.cos(phi1) * math.cos(phi2) * sl * sl
    return 2.0 * EARTH_RADIUS_KM * math.atan2(math.sqrt(h), math.sqrt(max(0.0, 1.0 - h)))


@dataclass(frozen=True)
class EpiGraph:
    """Immutable undirected graph of divisions.

    Node weights are active case counts; edge weights are center-to-center
    distances, every one in ``(0, threshold]``.  Adjacency lists are sorted
    by neighbor key so that any summation over neighbors has a fixed order.
    """

    nodes: tuple[Division, ...]
    threshold: float
    metric: str
    adjacency: Mapping[DivisionKey, tuple[tuple[DivisionKey, float], ...]]
    index: Mapping[DivisionKey, Division]

    def division(self, key: DivisionKey) -> Division:
        return self.index[key]

    def neighbors(self, key: DivisionKey) -> tuple[tuple[DivisionKey, float], ...]:
        """Neighbors of ``key`` with edge distances, sorted by neighbor key."""
        return self.adjacency[key]

    def edges(self) -> list[Edge]:
        """All edges once, as (smaller key, larger key, distance), sorted."""
        out = []
        for key, nbrs in self.adjacency.items():
            for other, dist in nbrs:
                if key < other:
                    out.append((key, other, dist))
        out.sort()
        return out

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.adjacency.values()) // 2

    def __contains__(self, key: DivisionKey) -> bool:
        return key in self.index


def build_graph(
    divisions: Sequence[Division],
    threshold: float,
    metric: str = DEGREE_EUCLIDEAN,
) -> EpiGraph:
    """Connect every pair of divisions within ``threshold`` of each other."""
    _check_inputs(divisions, threshold, metric)
    edges = grid_neighbors(divisions, threshold, metric)

    adjacency: dict[DivisionKey, list[tuple[DivisionKey, float]]] = {
        d.key: [] for d in divisions
    }
    for a, b, dist in edges:
        adjacency[a].append((b, dist))
        adjacency[b].append((a, dist))
    frozen = {key: tuple(sorted(nbrs)) for key, nbrs in adjacency.items()}
    return EpiGraph(
        nodes=tuple(divisions),
        threshold=threshold,
        metric=metric,
        adjacency=frozen,
        index={d.key: d for d in divisions},
    )


def brute_force_neighbors(
    divisions: Sequence[Division],
    threshold: float,
    metric: str = DEGREE_EUCLIDEAN,
) -> set[Edge]:
    """All-pairs reference sweep: every unordered pair within the threshold.

    Quadratic in the number of divisions; kept as the oracle that
    :func:`grid_neighbors` is checked against.
    """
    _check_inputs(divisions, threshold, metric)
    points = [d.point for d in divisions]
    n = len(points)
    edges: set[Edge] = set()
    coincident: list[tuple[int, int]] = []
    for i in range(n):
        pi = points[i]
        for j in range(i + 1, n):
            d = distance(pi, points[j], metric)
            if d < COINCIDENT_EPS:
                coincident.append((i, j))
            elif d <= threshold:
                edges.add(_canonical_edge(divisions[i].key, divisions[j].key, d))
    _raise_if_coincident(coincident, divisions)
    return edges


def grid_neighbors(
    divisions: Sequence[Division],
    threshold: float,
    metric: str = DEGREE_EUCLIDEAN,
) -> set[Edge]:
    """Grid-indexed neighbor sweep.

    Buckets points into cells at least one threshold wide, so only the
    cells adjacent to a point's own cell need to be scanned.  Returns
    exactly the edge set of :func:`brute_force_neighbors`.
    """
    _check_inputs(divisions, threshold, metric)
    if metric == DEGREE_EUCLIDEAN:
        return _grid_degree(divisions, threshold)
    return _grid_haversine(divisions, threshold)


def _grid_degree(divisions: Sequence[Division], threshold: float) -> set[Edge]:
    # Coincident pairs must be detected even when the threshold is smaller
    # than the coincidence epsilon, so cells never shrink below it.
    cell = max(threshold, COINCIDENT_EPS)
    points = [d.point for d in divisions]
    buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
    cells: list[tuple[int, int]] = []
    for i, p in enumerate(points):
        c = (math.floor(p.lat / cell), math.floor(p.lon / cell))
        buckets[c].append(i)
        cells.append(c)

    edges: set[Edge] = set()
    coincident: set[tuple[int, int]] = set()
    for i, p in enumerate(points):
        row, col = cells[i]
        for r in (row - 1, row, row + 1):
            for c in (col - 1, col, col + 1):
                for j in buckets.get((r, c), ()):
                    if j <= i:
                        continue
                    d = distance(p, points[j], DEGREE_EUCLIDEAN)
                    if d < COINCIDENT_EPS:
                        coincident.add((i, j))
                    elif d <= threshold:
                        edges.add(_canonical_edge(divisions[i].key, divisions[j].key, d))
    _raise_if_coincident(sorted(coincident), divisions)
    return edges


def _grid_haversine(divisions: Sequence[Division], threshold_km: float) -> set[Edge]:
    points = [d.point for d in divisions]
    if not points:
        return set()
    sweep_km = max(threshold_km, COINCIDENT_EPS)

    # Latitude rows: a pair within sweep_km spans strictly less than one
    # cell of latitude, so +-1 row always suffices.
    lat_cell = sweep_km / KM_PER_DEGREE

    # Longitude columns tile the full circle so the sweep can wrap the
    # antimeridian.  Cells are widened toward the poles, and the column
    # span is derived from the exact bound on the longitude difference of
    # a qualifying pair: sin(dlon/2) <= sin(d/2R) / cos(max|lat|).
    phi_max = max(abs(p.lat) for p in points)
    cos_phi = math.cos(math.radians(phi_max))
    widen = min(MAX_LON_WIDENING, 1.0 / max(cos_phi, 1e-12))
    lon_cell = lat_cell * widen
    n_cols = max(1, math.floor(360.0 / lon_cell))
    col_width = 360.0 / n_cols

    half_angle = sweep_km / (2.0 * EARTH_RADIUS_KM)
    sin_ratio = math.sin(half_angle) / max(cos_phi, 1e-300)
    if sin_ratio >= 1.0:
        col_span = n_cols  # threshold reaches around the polar cap
    else:
        max_dlon = math.degrees(2.0 * math.asin(sin_ratio))
        col_span = min(n_cols, math.ceil(max_dlon / col_width) + 1)

    buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
    cells: list[tuple[int, int]] = []
    for i, p in enumerate(points):
        row = math.floor(p.lat / lat_cell)
        lon = (p.lon + 180.0) % 360.0  # [0, 360); folds lon=180 onto -180
        col = min(n_cols - 1, math.floor(lon / col_width))
        buckets[(row, col)].append(i)
        cells.append((row, col))

    col_offsets = sorted({dc % n_cols for dc in range(-col_span, col_span + 1)})
    edges: set[Edge] = set()
    coincident: set[tuple[int, int]] = set()
    for i, p in enumerate(points):
        row, col = cells[i]
        for r in (row - 1, row, row + 1):
            for off in col_offsets:
                c = (col + off) % n_cols
                for j in buckets.get((r, c), ()):
                    if j <= i:
                        continue
                    d = distance(p, points[j], HAVERSINE_KM)
                    if d < COINCIDENT_EPS:
                        coincident.add((i, j))
                    elif d <= threshold_km:
                        edges.add(_canonical_edge(divisions[i].key, divisions[j].key, d))
    _raise_if_coincident(sorted(coincident), divisions)
    return edges


def _canonical_edge(a: DivisionKey, b: DivisionKey, dist: float) -> Edge:
    return (a, b, dist) if a < b else (b, a, dist)


def _check_inputs(divisions: Sequence[Division], threshold: float, metric: str) -> None:
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if not (math.isfinite(threshold) and threshold > 0):
        raise ConfigError(f"threshold must be a positive finite number, got {threshold!r}")
    seen: set[DivisionKey] = set()
    for d in divisions:
        if d.key in seen:
            raise DataError(f"duplicate division {d.key.label()!r} in graph input")
        seen.add(d.key)


def _raise_if_coincident(pairs: Iterable[tuple[int, int]], divisions: Sequence[Division]) -> None:
    for i, j in pairs:
        a, b = divisions[i].key, divisions[j].key
        raise DataError(
            f"coincident centers: {a.label()!r} and {b.label()!r} are less than "
            f"{COINCIDENT_EPS} apart; distinct divisions must not share a centroid"
        )


def graph_to_dict(graph: EpiGraph) -> dict:
    """Node-link representation used for the graph JSON artifact."""
    return {
        "nodes": [
            {
                "id": d.key.to_id(),
                "lat": d.point.lat,
                "lon": d.point.lon,
                "active": d.active,
                "delta": d.delta_active,
            }
            for d in graph.nodes
        ],
        "edges": [
            {"a": a.to_id(), "b": b.to_id(), "dist": dist}
            for a, b, dist in graph.edges()
        ],
        "threshold": graph.threshold,
        "metric": graph.metric,
    }


def graph_from_dict(payload: dict) -> EpiGraph:
    """Rebuild a graph from its node-link representation.

    Distances are taken verbatim from the file rather than recomputed, so a
    round trip through JSON preserves every weight bit-for-bit.
    """
    try:
        node_items = payload["nodes"]
        edge_items = payload["edges"]
        threshold = payload["threshold"]
        metric = payload["metric"]
    except (KeyError, TypeError) as exc:
        raise DataError(f"graph payload missing field: {exc}") from exc
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r} in graph payload")

    divisions = []
    for item in node_items:
        divisions.append(
            Division(
                key=DivisionKey.from_id(item["id"]),
                point=GeoPoint(float(item["lat"]), float(item["lon"])),
                active=int(item["active"]),
                delta_active=int(item["delta"]),
            )
        )
    index = {d.key: d for d in divisions}

    adjacency: dict[DivisionKey, list[tuple[DivisionKey, float]]] = {
        d.key: [] for d in divisions
    }
    for item in edge_items:
        a = DivisionKey.from_id(item["a"])
        b = DivisionKey.from_id(item["b"])
        dist = float(item["dist"])
        if a not in index or b not in index:
            raise DataError(f"edge references unknown node: {item['a']} -- {item['b']}")
        adjacency[a].append((b, dist))
        adjacency[b].append((a, dist))
    frozen = {key: tuple(sorted(nbrs)) for key, nbrs in adjacency.items()}
    return EpiGraph(
        nodes=tuple(divisions),
        threshold=float(threshold),
        metric=metric,
        adjacency=frozen,
        index=index,
    )
