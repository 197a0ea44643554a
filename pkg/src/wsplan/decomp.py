"""
Free-space triangulation, region labeling and the region adjacency graph.

The triangulation is a constrained Delaunay triangulation over obstacle
vertices and the bounds corners. scipy's Delaunay gives the unconstrained
start; missing obstacle and bounds edges are recovered by edge flipping and
the Delaunay property is restored around the recovered edges.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np
from scipy.spatial import Delaunay

from .errors import DisconnectedError, PreconditionError, SceneValidationError
from .geom import EPS_GEOM, Containment, convex_hull, point_in_polygon, polygons_intersect, segment_intersect, Segment
from .scene import Scene

BOUNDARY = -1


# --------------------------------------------------------------------------
# constrained Delaunay triangulation


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _incircle(a, b, c, d) -> float:
    m = np.array([[a[0] - d[0], a[1] - d[1], (a[0] - d[0]) ** 2 + (a[1] - d[1]) ** 2],
                  [b[0] - d[0], b[1] - d[1], (b[0] - d[0]) ** 2 + (b[1] - d[1]) ** 2],
                  [c[0] - d[0], c[1] - d[1], (c[0] - d[0]) ** 2 + (c[1] - d[1]) ** 2]])
    return float(np.linalg.det(m))


class _Mesh:
    """Triangle soup with a directed-edge index, supporting edge flips."""

    def __init__(self, pts: np.ndarray, tris: np.ndarray):
        self.p = pts
        self.tris = []
        self.edge = {}
        for t in tris:
            a, b, c = (int(x) for x in t)
            if _orient(pts[a], pts[b], pts[c]) < 0:
                b, c = c, b
            self._add(len(self.tris), (a, b, c))
            self.tris.append((a, b, c))

    def _add(self, k, tri):
        a, b, c = tri
        self.edge[(a, b)] = k
        self.edge[(b, c)] = k
        self.edge[(c, a)] = k

    def _remove(self, tri):
        a, b, c = tri
        for e in ((a, b), (b, c), (c, a)):
            self.edge.pop(e, None)

    def has_edge(self, a, b) -> bool:
        return (a, b) in self.edge or (b, a) in self.edge

    def quad(self, a, b):
        """Vertices (c, d) opposite edge a->b, or None on the hull."""
        k1, k2 = self.edge.get((a, b)), self.edge.get((b, a))
        if k1 is None or k2 is None:
            return None
        c = next(v for v in self.tris[k1] if v not in (a, b))
        d = next(v for v in self.tris[k2] if v not in (a, b))
        return k1, k2, c, d

    def flip(self, a, b):
        k1, k2, c, d = self.quad(a, b)
        self._remove(self.tris[k1])
        self._remove(self.tris[k2])
        t1, t2 = (a, d, c), (d, b, c)
        self.tris[k1], self.tris[k2] = t1, t2
        self._add(k1, t1)
        self._add(k2, t2)
        return c, d

    def undirected_edges(self):
        return {(min(a, b), max(a, b)) for (a, b) in self.edge}


def _proper_cross(p, q, r, s) -> bool:
    o1, o2 = _orient(p, q, r), _orient(p, q, s)
    o3, o4 = _orient(r, s, p), _orient(r, s, q)
    return o1 * o2 < 0 and o3 * o4 < 0


def _recover_edge(mesh: _Mesh, u: int, v: int, constrained: set):
    if mesh.has_edge(u, v):
        return
    P = mesh.p
    queue = deque(e for e in mesh.undirected_edges() if _proper_cross(P[u], P[v], P[e[0]], P[e[1]]))
    new_edges = []
    guard = 0
    while queue:
        guard += 1
        if guard > 100000:
            raise SceneValidationError("constraint edge recovery did not terminate")
        a, b = queue.popleft()
        q = mesh.quad(a, b) or mesh.quad(b, a)
        if q is None:
            continue
        if mesh.quad(a, b) is None:
            a, b = b, a
        _, _, c, d = mesh.quad(a, b)
        if not _proper_cross(P[a], P[b], P[c], P[d]):
            queue.append((a, b))
            continue
        mesh.flip(a, b)
        e = (min(c, d), max(c, d))
        if _proper_cross(P[u], P[v], P[c], P[d]):
            queue.append(e)
        else:
            new_edges.append(e)
    # restore the Delaunay property around the recovered edge
    changed = True
    rounds = 0
    while changed and rounds < 100:
        changed = False
        rounds += 1
        for i, (a, b) in enumerate(new_edges):
            if {a, b} == {u, v} or (a, b) in constrained or not mesh.has_edge(a, b):
                continue
            q = mesh.quad(a, b)
            if q is None:
                q = mesh.quad(b, a)
                a, b = b, a
            if q is None:
                continue
            _, _, c, d = q
            if _incircle(P[a], P[b], P[c], P[d]) > EPS_GEOM and _proper_cross(P[a], P[b], P[c], P[d]):
                mesh.flip(a, b)
                new_edges[i] = (min(c, d), max(c, d))
                changed = True


@dataclass
class Triangulation:
    """Free-space triangles with per-vertex source tags.

    Attributes:
        points: (V, 2) vertex coordinates.
        triangles: (T, 3) CCW vertex indices of free triangles only.
        tags: (V,) obstacle id of each vertex, -1 for bounds corners and
            bounds points.
        constrained: set of undirected constraint edges (obstacle and bounds).
    """
    points: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    constrained: set = field(default_factory=set)

    @property
    def areas(self) -> np.ndarray:
        a, b, c = (self.points[self.triangles[:, i]] for i in range(3))
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    @property
    def centroids(self) -> np.ndarray:
        return self.points[self.triangles].mean(axis=1)

    def edge_map(self) -> dict:
        """Undirected edge -> list of free triangle indices using it."""
        out = {}
        for k, (a, b, c) in enumerate(self.triangles):
            for e in ((a, b), (b, c), (c, a)):
                out.setdefault((min(e), max(e)), []).append(k)
        return out

    def locate(self, P) -> np.ndarray:
        """Index of a free triangle containing each point, -1 if none."""
        P = np.atleast_2d(np.asarray(P, float))
        A, B, C = (self.points[self.triangles[:, i]] for i in range(3))
        tol = -1e-9 * np.maximum(1.0, np.abs(_cross(B - A, C - A)))
        out = np.full(len(P), -1)
        for s in range(0, len(P), 2048):
            p = P[s:s + 2048, None, :]
            inside = (_cross(B - p, C - p) >= tol) & (_cross(C - p, A - p) >= tol) & (_cross(A - p, B - p) >= tol)
            hit = inside.any(axis=1)
            out[s:s + 2048] = np.where(hit, inside.argmax(axis=1), -1)
        return out


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _check_obstacles(scene: Scene):
    obs = scene.obstacles
    for i, j in itertools.combinations(range(len(obs)), 2):
        if polygons_intersect(obs[i], obs[j]):
            raise SceneValidationError(f"obstacles {i} and {j} overlap or touch")
    xmin, ymin, xmax, ymax = scene.bounds
    for k, p in enumerate(obs):
        v = p.vertices
        if np.any(v[:, 0] < xmin - EPS_GEOM) or np.any(v[:, 0] > xmax + EPS_GEOM) or \
                np.any(v[:, 1] < ymin - EPS_GEOM) or np.any(v[:, 1] > ymax + EPS_GEOM):
            raise SceneValidationError(f"obstacle {k} overlaps the bounds boundary")


def triangulate_free_space(scene: Scene) -> Triangulation:
    """Constrained Delaunay triangulation of the free workspace.

    Vertices are all obstacle vertices plus the four bounds corners. Every
    obstacle edge and the bounds rectangle appear as triangulation edges;
    triangles inside obstacles are dropped.

    Raises:
        SceneValidationError: obstacles overlap each other or the bounds.
    """
    _check_obstacles(scene)
    pts = [tuple(c) for c in scene.corners]
    tags = [BOUNDARY] * 4
    index = {p: i for i, p in enumerate(pts)}
    constraints = []
    for k, poly in enumerate(scene.obstacles):
        ids = []
        for v in poly.vertices:
            key = (float(v[0]), float(v[1]))
            if key in index:
                raise SceneValidationError(f"obstacle {k} shares a vertex with another feature")
            index[key] = len(pts)
            pts.append(key)
            tags.append(k)
            ids.append(index[key])
        constraints += [(ids[i], ids[(i + 1) % len(ids)]) for i in range(len(ids))]
    P = np.array(pts, float)
    xmin, ymin, xmax, ymax = scene.bounds
    # bounds sides split at every vertex lying on them
    sides = [(lambda q: abs(q[1] - ymin) <= EPS_GEOM, 0), (lambda q: abs(q[0] - xmax) <= EPS_GEOM, 1),
             (lambda q: abs(q[1] - ymax) <= EPS_GEOM, 0), (lambda q: abs(q[0] - xmin) <= EPS_GEOM, 1)]
    for on_side, axis in sides:
        ids = sorted((i for i in range(len(P)) if on_side(P[i])), key=lambda i: P[i, axis])
        constraints += list(zip(ids[:-1], ids[1:]))

    dl = Delaunay(P)
    if len(getattr(dl, "coplanar", [])):
        raise SceneValidationError("degenerate vertex set: duplicate points")
    mesh = _Mesh(P, dl.simplices)
    cset = {(min(a, b), max(a, b)) for a, b in constraints}
    for a, b in _split_collinear(P, constraints):
        cset.add((min(a, b), max(a, b)))
        _recover_edge(mesh, a, b, cset)
    for a, b in cset:
        if not mesh.has_edge(a, b):
            raise SceneValidationError(f"could not recover constraint edge {a}-{b}")

    tris = np.array(mesh.tris, dtype=int)
    cents = P[tris].mean(axis=1)
    keep = np.ones(len(tris), dtype=bool)
    for k, poly in enumerate(scene.obstacles):
        x0, y0, x1, y1 = poly.bbox
        inbox = (cents[:, 0] >= x0) & (cents[:, 0] <= x1) & (cents[:, 1] >= y0) & (cents[:, 1] <= y1)
        cand = np.flatnonzero(inbox & keep)
        for t in cand:
            if point_in_polygon(cents[t], poly) == Containment.INSIDE:
                keep[t] = False
    tris = tris[keep]
    a, b, c = (P[tris[:, i]] for i in range(3))
    area = 0.5 * _cross(b - a, c - a)
    tris = tris[area > 0]
    return Triangulation(P, tris, np.array(tags, dtype=int), cset)


def _split_collinear(P: np.ndarray, constraints):
    """Split constraint edges at any vertex lying in their interior."""
    out = []
    for a, b in constraints:
        d = P[b] - P[a]
        L2 = float(d @ d)
        on = []
        for i in range(len(P)):
            if i in (a, b):
                continue
            w = P[i] - P[a]
            t = float(w @ d) / L2
            if 0 < t < 1 and abs(d[0] * w[1] - d[1] * w[0]) <= EPS_GEOM * math.sqrt(L2):
                on.append((t, i))
        chain = [a] + [i for _, i in sorted(on)] + [b]
        out += list(zip(chain[:-1], chain[1:]))
    return out


# --------------------------------------------------------------------------
# regions


def _primes(n: int) -> list:
    out = []
    k = 2
    while len(out) < n:
        if all(k % p for p in out if p * p <= k):
            out.append(k)
        k += 1
    return out


def godel_code(label) -> int:
    """Product of primes, -1 -> 2 and obstacle i -> the (i+2)-th prime."""
    label = sorted(set(label))
    if not label:
        return 1
    pr = _primes(max(label) + 2)
    code = 1
    for i in label:
        code *= pr[i + 1]
    return code


@dataclass(frozen=True)
class FreeRegion:
    id: int
    triangles: tuple
    label: tuple
    code: int
    centroid: tuple
    area: float


def hull_groups(scene: Scene) -> list:
    """Obstacle group per obstacle id: obstacles with intersecting convex hulls merge."""
    n = len(scene.obstacles)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    hulls = [convex_hull(p.vertices) for p in scene.obstacles]
    for i, j in itertools.combinations(range(n), 2):
        if polygons_intersect(hulls[i], hulls[j]):
            ri, rj = find(i), find(j)
            parent[max(ri, rj)] = min(ri, rj)
    return [find(i) for i in range(n)]


def classify_regions(tri: Triangulation, scene: Scene) -> list:
    """Group free triangles into labeled regions.

    Triangles whose vertices come from at most two obstacle groups (the
    bounds count as one) are grouped by tag-set and edge connectivity.
    Triangles touching three or more groups are merged with edge-adjacent
    such triangles into junction regions labeled by the union of their tags.
    """
    groups = hull_groups(scene)
    members = {}
    for i, g in enumerate(groups):
        members.setdefault(g, []).append(i)
    vgroup = np.array([BOUNDARY if t == BOUNDARY else groups[t] for t in tri.tags], dtype=int)
    tsets = [frozenset(vgroup[t].tolist()) for t in tri.triangles]
    junction = [len(s) >= 3 for s in tsets]

    adj = [[] for _ in range(len(tri.triangles))]
    for e, ts in tri.edge_map().items():
        if len(ts) == 2 and e not in tri.constrained:
            i, j = ts
            adj[i].append(j)
            adj[j].append(i)

    def same(i, j):
        if junction[i] or junction[j]:
            return junction[i] and junction[j]
        return tsets[i] == tsets[j]

    comp = [-1] * len(tri.triangles)
    regions_tris = []
    for s in range(len(tri.triangles)):
        if comp[s] >= 0:
            continue
        cid = len(regions_tris)
        comp[s] = cid
        stack, members_t = [s], [s]
        while stack:
            i = stack.pop()
            for j in adj[i]:
                if comp[j] < 0 and same(i, j):
                    comp[j] = cid
                    stack.append(j)
                    members_t.append(j)
        regions_tris.append(sorted(members_t))

    areas = tri.areas
    cents = tri.centroids
    out = []
    for rid, ts in enumerate(regions_tris):
        gset = set().union(*(tsets[t] for t in ts))
        label = set()
        for g in gset:
            label.update([BOUNDARY] if g == BOUNDARY else members[g])
        label = tuple(sorted(label))
        w = areas[ts]
        c = (cents[ts] * w[:, None]).sum(axis=0) / w.sum()
        out.append(FreeRegion(rid, tuple(ts), label, godel_code(label), (float(c[0]), float(c[1])), float(w.sum())))
    return out


def build_adjacency(regions, tri: Optional[Triangulation] = None) -> nx.Graph:
    """Region graph: nodes are region ids, edges join regions sharing a triangle edge.

    Edge weight is the distance between region centroids. With a single
    region the triangulation is not needed.
    """
    g = nx.Graph()
    owner = {}
    for r in regions:
        g.add_node(r.id, label=r.label, code=r.code, centroid=r.centroid)
        for t in r.triangles:
            owner[t] = r.id
    if tri is None:
        if len(regions) > 1:
            raise PreconditionError("triangulation required to connect several regions")
        return g
    for e, ts in tri.edge_map().items():
        if len(ts) != 2:
            continue
        a, b = owner[ts[0]], owner[ts[1]]
        if a != b and not g.has_edge(a, b):
            w = math.dist(g.nodes[a]["centroid"], g.nodes[b]["centroid"])
            g.add_edge(a, b, weight=w)
    return g


def route_weight(graph: nx.Graph, route) -> float:
    return sum(graph[u][v]["weight"] for u, v in zip(route[:-1], route[1:]))


def region_route(graph: nx.Graph, start_region: int, goal_region: int, k: int = 1) -> list:
    """Minimum-weight region sequences, best first.

    Returns:
        The best route (list of region ids) when ``k == 1``; otherwise a list
        of up to ``k`` routes in non-decreasing weight order.

    Raises:
        PreconditionError: a region id is not in the graph.
        DisconnectedError: no route exists.
    """
    for r in (start_region, goal_region):
        if r not in graph:
            raise PreconditionError(f"region {r} not in graph")
    if start_region == goal_region:
        routes = [[start_region]]
    else:
        try:
            gen = nx.shortest_simple_paths(graph, start_region, goal_region, weight="weight")
            routes = list(itertools.islice(gen, k))
        except nx.NetworkXNoPath:
            raise DisconnectedError(f"no route between regions {start_region} and {goal_region}") from None
    return routes[0] if k == 1 else routes


@dataclass
class Decomposition:
    scene: Scene
    triangulation: Triangulation
    regions: list
    graph: nx.Graph

    @property
    def tri_region(self) -> np.ndarray:
        out = np.full(len(self.triangulation.triangles), -1)
        for r in self.regions:
            out[list(r.triangles)] = r.id
        return out

    def locate(self, p) -> int:
        """Region containing a point, -1 if inside an obstacle or out of bounds."""
        t = self.triangulation.locate(p)[0]
        return -1 if t < 0 else int(self.tri_region[t])

    def locate_many(self, P) -> np.ndarray:
        t = self.triangulation.locate(P)
        reg = self.tri_region
        return np.where(t < 0, -1, reg[np.maximum(t, 0)])

    def route(self, start_region, goal_region, k=1):
        return region_route(self.graph, start_region, goal_region, k)

    def region_triangles(self, rid: int) -> np.ndarray:
        tri = self.triangulation
        return tri.points[tri.triangles[list(self.regions[rid].triangles)]]

    def sample_region(self, rid: int, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform random interior points of a region."""
        T = self.region_triangles(rid)
        a = 0.5 * np.abs(_cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0]))
        k = rng.choice(len(T), size=n, p=a / a.sum())
        u, v = rng.random(n), rng.random(n)
        flip = u + v > 1
        u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
        t = T[k]
        return t[:, 0] + u[:, None] * (t[:, 1] - t[:, 0]) + v[:, None] * (t[:, 2] - t[:, 0])

    def longest_edge(self, rid: int) -> float:
        T = self.region_triangles(rid)
        e = np.concatenate([T[:, 1] - T[:, 0], T[:, 2] - T[:, 1], T[:, 0] - T[:, 2]])
        return float(np.hypot(e[:, 0], e[:, 1]).max())

    def to_dict(self) -> dict:
        tri = self.triangulation
        return {
            "points": tri.points.tolist(),
            "triangles": tri.triangles.tolist(),
            "regions": [{"id": r.id, "label": list(r.label), "code": r.code, "triangles": list(r.triangles),
                         "centroid": list(r.centroid), "area": r.area} for r in self.regions],
            "edges": [{"a": int(u), "b": int(v), "weight": float(d["weight"])}
                      for u, v, d in sorted(self.graph.edges(data=True))],
        }


def decompose(scene: Scene) -> Decomposition:
    tri = triangulate_free_space(scene)
    regions = classify_regions(tri, scene)
    return Decomposition(scene, tri, regions, build_adjacency(regions, tri))
