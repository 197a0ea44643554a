"""
Clearance-aware visibility graph over inflated obstacle vertices.

Convex obstacle vertices are pushed outward along their angle bisector so a
disk of radius r centred on the node just touches both incident edges.
Sharp vertices, where that offset would exceed 2r, get two bevel nodes
instead. Reflex vertices produce no nodes.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidEndpointError, NoPathError
from .geom import EPS_GEOM, as_point, segment_enters_interior
from .robot import point_clearance, segment_clearance
from .scene import Scene

log = logging.getLogger(__name__)

TIE_DIGITS = 9


def inflated_vertices(scene: Scene, r: float):
    """Candidate node positions with the obstacle/vertex they came from.

    Returns:
        (points (n, 2), sources list of (obstacle, vertex)) before bounds
        clamping.
    """
    pts, src = [], []
    for k, poly in enumerate(scene.obstacles):
        v = poly.vertices
        n = len(v)
        convex = poly.convex_vertex_mask()
        normals = poly.outward_normals()
        for i in range(n):
            if not convex[i]:
                continue
            n1, n2 = normals[i - 1], normals[i]
            if r == 0:
                pts.append(v[i].copy())
                src.append((k, i))
                continue
            c = float(np.clip(n1 @ n2, -1.0, 1.0))
            cos_half = math.sqrt((1 + c) / 2)
            if cos_half > 0.5:
                u = (n1 + n2) / np.linalg.norm(n1 + n2)
                pts.append(v[i] + u * (r / cos_half))
                src.append((k, i))
            else:
                d1 = v[i] - v[i - 1]
                d1 /= np.linalg.norm(d1)
                d2 = v[(i + 1) % n] - v[i]
                d2 /= np.linalg.norm(d2)
                pts.append(v[i] + r * n1 + r * d1)
                src.append((k, i))
                pts.append(v[i] + r * n2 - r * d2)
                src.append((k, i))
    return np.array(pts, float).reshape(-1, 2), src


def _segments_clear(A, B, scene: Scene, r: float) -> np.ndarray:
    """True where segment A_i-B_i keeps clearance r from obstacles and bounds."""
    if len(A) == 0:
        return np.zeros(0, dtype=bool)
    c = segment_clearance(A, B, 0.0, 0.0, 0.0, scene)
    dist = c[:, :-1]
    bnd = c[:, -1]
    ok = np.all(dist >= r - EPS_GEOM, axis=1) & (bnd >= r - EPS_GEOM)
    if r <= EPS_GEOM:
        for i in np.flatnonzero(ok & np.any(dist <= EPS_GEOM, axis=1)):
            for k in np.flatnonzero(dist[i] <= EPS_GEOM):
                if segment_enters_interior(A[i], B[i], scene.obstacles[k]):
                    ok[i] = False
                    break
    return ok


@dataclass
class VisibilityGraph:
    """Nodes, length-weighted adjacency and the clearance radius.

    Nodes are sorted lexicographically by (x, y), so comparing node index
    sequences compares paths lexicographically.
    """
    scene: Scene
    clearance: float
    nodes: np.ndarray
    weights: np.ndarray  # (n, n), inf where no edge

    @property
    def edges(self) -> list:
        i, j = np.nonzero(np.isfinite(self.weights))
        return [(int(a), int(b)) for a, b in zip(i, j) if a < b]

    def endpoint_ok(self, p) -> bool:
        c = point_clearance(as_point(p)[None], 0.0, self.scene)[0]
        ok = bool(np.all(c[:-1] >= self.clearance - EPS_GEOM) and c[-1] >= self.clearance - EPS_GEOM)
        if ok and self.clearance <= EPS_GEOM:
            from .geom import point_in_polygon, Containment
            ok = all(point_in_polygon(p, poly) is not Containment.INSIDE for poly in self.scene.obstacles)
        return ok


def build_visibility_graph(scene: Scene, r: float) -> VisibilityGraph:
    """Visibility graph whose edges clear every obstacle by at least r.

    Nodes that fall outside the bounds shrunk by r, or too close to another
    obstacle, are dropped; dropping for the bounds is logged as a warning.
    """
    if r < 0:
        raise ValueError("clearance must be non-negative")
    pts, src = inflated_vertices(scene, r)
    keep = []
    xmin, ymin, xmax, ymax = scene.bounds
    for i, p in enumerate(pts):
        inside = xmin + r - EPS_GEOM <= p[0] <= xmax - r + EPS_GEOM and ymin + r - EPS_GEOM <= p[1] <= ymax - r + EPS_GEOM
        if not inside:
            log.warning("visibility node from obstacle %d vertex %d falls outside the bounds; dropped", *src[i])
            continue
        keep.append(i)
    pts = pts[keep]
    if len(pts):
        c = point_clearance(pts, 0.0, scene)[:, :-1]
        pts = pts[np.all(c >= r - 1e-7, axis=1)] if c.shape[1] else pts
        pts = np.unique(np.round(pts, 12), axis=0)
    order = np.lexsort((pts[:, 1], pts[:, 0])) if len(pts) else np.zeros(0, int)
    pts = pts[order]
    n = len(pts)
    W = np.full((n, n), np.inf)
    if n > 1:
        I, J = np.triu_indices(n, 1)
        ok = _segments_clear(pts[I], pts[J], scene, r)
        d = np.hypot(*(pts[J] - pts[I]).T)
        W[I[ok], J[ok]] = d[ok]
        W[J[ok], I[ok]] = d[ok]
    return VisibilityGraph(scene, float(r), pts, W)


def shortest_point_path(graph: VisibilityGraph, start, goal,
                        node_mask: Optional[np.ndarray] = None,
                        edge_filter: Optional[Callable] = None) -> np.ndarray:
    """Shortest polyline from start to goal on the graph with a per-query overlay.

    Ties are broken by fewer vertices, then lexicographic node order.

    Args:
        node_mask: optional boolean mask restricting usable graph nodes.
        edge_filter: optional bulk predicate (A, B) -> bool mask over
            candidate edges A_i-B_i, further restricting edges.

    Returns:
        (m, 2) array of polyline vertices including start and goal.

    Raises:
        InvalidEndpointError: start or goal violates the clearance.
        NoPathError: goal unreachable.
    """
    s, g = as_point(start), as_point(goal)
    for name, p in (("start", s), ("goal", g)):
        if not graph.endpoint_ok(p):
            raise InvalidEndpointError(f"{name} {_fmt(p)} violates clearance {graph.clearance}")
    if np.allclose(s, g, atol=EPS_GEOM, rtol=0):
        return np.array([s, g])
    n = len(graph.nodes)
    mask = np.ones(n, dtype=bool) if node_mask is None else np.asarray(node_mask, bool)
    idx = np.flatnonzero(mask)
    P = np.vstack([graph.nodes[idx], s, g])
    m = len(idx)
    S, G = m, m + 1
    W = np.full((m + 2, m + 2), np.inf)
    W[:m, :m] = graph.weights[np.ix_(idx, idx)]
    ends = np.vstack([np.repeat([s], m + 1, axis=0), np.repeat([g], m, axis=0)])
    others = np.vstack([P[:m], g[None], P[:m]])
    ok = _segments_clear(ends, others, graph.scene, graph.clearance)
    d = np.hypot(*(others - ends).T)
    for k in range(m + 1):
        if ok[k]:
            j = G if k == m else k
            W[S, j] = W[j, S] = d[k]
    for k in range(m):
        if ok[m + 1 + k]:
            W[G, k] = W[k, G] = d[m + 1 + k]
    if edge_filter is not None:
        I, J = np.nonzero(np.triu(np.isfinite(W), 1))
        bad = ~np.asarray(edge_filter(P[I], P[J]), bool)
        W[I[bad], J[bad]] = np.inf
        W[J[bad], I[bad]] = np.inf
    path = _dijkstra(W, S, G)
    if path is None:
        raise NoPathError(f"no path from {_fmt(s)} to {_fmt(g)} at clearance {graph.clearance}")
    return P[path]


def _fmt(p) -> str:
    return f"({p[0]:g}, {p[1]:g})"


def _dijkstra(W: np.ndarray, s: int, g: int):
    best = {s: (0.0, 0, (s,))}
    heap = [(0.0, 0, (s,), s)]
    done = set()
    while heap:
        L, h, path, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == g:
            return list(path)
        for v in np.flatnonzero(np.isfinite(W[u])):
            v = int(v)
            if v in done:
                continue
            key = (round(L + W[u, v], TIE_DIGITS), h + 1, path + (v,))
            if v not in best or key < best[v]:
                best[v] = key
                heapq.heappush(heap, (key[0], key[1], key[2], v))
    return None


def path_length(poly: np.ndarray) -> float:
    poly = np.asarray(poly, float)
    return float(np.hypot(*np.diff(poly, axis=0).T).sum()) if len(poly) > 1 else 0.0
