"""
Planar geometric primitives and predicates.

Everything here works on float64 numpy arrays of shape (2,) (points) or
(n, 2) (point lists).  Boundary and degeneracy decisions use the absolute
tolerance ``EPS_GEOM``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DegenerateInputError, SceneValidationError

EPS_GEOM = 1e-9


def as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(arr)):
        raise DegenerateInputError(f"non-finite point {p!r}")
    return arr


def cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def orient(a, b, c) -> float:
    """Twice the signed area of triangle abc (positive if counter-clockwise)."""
    return float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def unit(v) -> np.ndarray:
    n = math.hypot(v[0], v[1])
    if n == 0.0:
        raise DegenerateInputError("cannot normalize a zero vector")
    return np.asarray(v, dtype=float) / n


def polar_angle(v) -> float:
    """Angle of v in [0, 2*pi)."""
    a = math.atan2(v[1], v[0])
    return a + 2.0 * math.pi if a < 0.0 else a


def wrap_angle(a):
    """Wrap angle(s) into (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


# --------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class Segment:
    a: tuple
    b: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in as_point(self.a)))
        object.__setattr__(self, "b", tuple(float(x) for x in as_point(self.b)))

    @property
    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])


class Containment(enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


class Polygon:
    """Simple polygon stored counter-clockwise.

    Clockwise input is reversed. Construction fails on fewer than three
    vertices, repeated consecutive vertices, zero area, or self-intersection.
    """

    __slots__ = ("_v", "_ears")

    def __init__(self, vertices):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise DegenerateInputError("polygon vertices must be an (n, 2) array")
        if not np.all(np.isfinite(v)):
            raise DegenerateInputError("polygon has non-finite coordinates")
        if len(v) < 3:
            raise DegenerateInputError("polygon needs at least 3 vertices")
        nxt = np.roll(v, -1, axis=0)
        if np.any(np.hypot(*(nxt - v).T) <= EPS_GEOM):
            raise DegenerateInputError("polygon has repeated consecutive vertices")
        if not _is_simple(v):
            raise SceneValidationError("polygon is not simple")
        area = 0.5 * float(np.sum(v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]))
        if abs(area) <= EPS_GEOM:
            raise DegenerateInputError("polygon has zero area")
        if area < 0:
            v = v[::-1].copy()
        v.setflags(write=False)
        self._v = v

    @property
    def vertices(self) -> np.ndarray:
        return self._v

    def __len__(self):
        return len(self._v)

    def __repr__(self):
        return f"Polygon({self._v.tolist()!r})"

    def __eq__(self, other):
        return (isinstance(other, Polygon) and self._v.shape == other._v.shape
                and bool(np.array_equal(self._v, other._v)))

    def __hash__(self):
        return hash(self._v.tobytes())

    def edges(self):
        """Return (starts, ends) arrays of the directed CCW edges."""
        return self._v, np.roll(self._v, -1, axis=0)

    @property
    def area(self) -> float:
        a, b = self.edges()
        return 0.5 * float(np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]))

    @property
    def centroid(self) -> np.ndarray:
        a, b = self.edges()
        c = a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]
        A = 0.5 * c.sum()
        return np.array([np.sum((a[:, 0] + b[:, 0]) * c), np.sum((a[:, 1] + b[:, 1]) * c)]) / (6 * A)

    @property
    def bbox(self):
        lo, hi = self._v.min(axis=0), self._v.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def outward_normals(self) -> np.ndarray:
        a, b = self.edges()
        d = b - a
        n = np.stack([d[:, 1], -d[:, 0]], axis=1)
        return n / np.hypot(n[:, 0], n[:, 1])[:, None]

    def is_convex(self) -> bool:
        v = self._v
        prev, nxt = np.roll(v, 1, axis=0), np.roll(v, -1, axis=0)
        turn = (v[:, 0] - prev[:, 0]) * (nxt[:, 1] - v[:, 1]) - (v[:, 1] - prev[:, 1]) * (nxt[:, 0] - v[:, 0])
        return bool(np.all(turn >= -EPS_GEOM))

    def convex_vertex_mask(self) -> np.ndarray:
        """True where the interior angle is strictly less than pi."""
        v = self._v
        prev, nxt = np.roll(v, 1, axis=0), np.roll(v, -1, axis=0)
        turn = (v[:, 0] - prev[:, 0]) * (nxt[:, 1] - v[:, 1]) - (v[:, 1] - prev[:, 1]) * (nxt[:, 0] - v[:, 0])
        return turn > EPS_GEOM


def _is_simple(v: np.ndarray) -> bool:
    n = len(v)
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        for j in range(i + 1, n):
            c, d = v[j], v[(j + 1) % n]
            if j == i + 1 or (i == 0 and j == n - 1):
                # adjacent edges: only the shared vertex may be common
                shared = b if j == i + 1 else a
                other_self = a if j == i + 1 else b
                other_nb = d if j == i + 1 else c
                if abs(orient(other_self, shared, other_nb)) <= EPS_GEOM * max(1.0, _dist(other_self, shared)):
                    # collinear neighbours: must not fold back onto each other
                    if np.dot(other_self - shared, other_nb - shared) > 0:
                        return False
                continue
            if segment_intersect(Segment(a, b), Segment(c, d)) is not None:
                return False
    return True


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


# --------------------------------------------------------------------------
# predicates


def _on_segment(p, a, b) -> bool:
    return point_segment_distance(p, a, b) <= EPS_GEOM


def segment_intersect(s1: Segment, s2: Segment):
    """Intersection of two closed segments.

    Returns:
        None if disjoint, a point (ndarray) for a single common point, or a
        Segment for a collinear overlap of positive length.
    """
    a, b = np.array(s1.a), np.array(s1.b)
    c, d = np.array(s2.a), np.array(s2.b)
    la, lc = _dist(a, b), _dist(c, d)

    if la <= EPS_GEOM and lc <= EPS_GEOM:
        return a if _dist(a, c) <= EPS_GEOM else None
    if la <= EPS_GEOM:
        return a if _on_segment(a, c, d) else None
    if lc <= EPS_GEOM:
        return c if _on_segment(c, a, b) else None

    # signed distances of each endpoint to the other segment's line
    dc, dd = orient(a, b, c) / la, orient(a, b, d) / la
    da, db = orient(c, d, a) / lc, orient(c, d, b) / lc

    # collinear if either segment lies on the other's line, so the test is symmetric
    if (abs(dc) <= EPS_GEOM and abs(dd) <= EPS_GEOM) or (abs(da) <= EPS_GEOM and abs(db) <= EPS_GEOM):
        # measure along the longer segment (ties by coordinates) for argument-order independence
        swap = lc > la or (lc == la and (tuple(c) + tuple(d)) < (tuple(a) + tuple(b)))
        p, q, r, s, lp = (c, d, a, b, lc) if swap else (a, b, c, d, la)
        u = (q - p) / lp
        tr, ts = float(np.dot(r - p, u)), float(np.dot(s - p, u))
        lo, hi = max(0.0, min(tr, ts)), min(lp, max(tr, ts))
        if lo > hi + EPS_GEOM:
            return None
        if hi - lo <= EPS_GEOM:
            return p + 0.5 * (lo + hi) * u
        e0, e1 = p + lo * u, p + hi * u
        # keep the overlap oriented like s1
        if np.dot(e1 - e0, b - a) < 0:
            e0, e1 = e1, e0
        return Segment(e0, e1)

    if ((dc > EPS_GEOM and dd < -EPS_GEOM) or (dc < -EPS_GEOM and dd > EPS_GEOM)) and \
       ((da > EPS_GEOM and db < -EPS_GEOM) or (da < -EPS_GEOM and db > EPS_GEOM)):
        t = da / (da - db)
        return a + t * (b - a)

    # endpoint touches
    for p, q1, q2 in ((c, a, b), (d, a, b), (a, c, d), (b, c, d)):
        if _on_segment(p, q1, q2):
            return p.copy()
    return None


def segments_intersect(a, b, c, d) -> bool:
    return segment_intersect(Segment(a, b), Segment(c, d)) is not None


def point_segment_distance(p, a, b) -> float:
    ab = (b[0] - a[0], b[1] - a[1])
    L2 = ab[0] * ab[0] + ab[1] * ab[1]
    if L2 == 0.0:
        return _dist(p, a)
    t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / L2
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return math.hypot(p[0] - a[0] - t * ab[0], p[1] - a[1] - t * ab[1])


def closest_point_on_segment(p, a, b) -> np.ndarray:
    a = np.asarray(a, float)
    ab = np.asarray(b, float) - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return a.copy()
    t = min(1.0, max(0.0, float((np.asarray(p) - a) @ ab) / L2))
    return a + t * ab


def segment_segment_distance(a, b, c, d) -> float:
    if segments_intersect(a, b, c, d):
        return 0.0
    return min(point_segment_distance(a, c, d), point_segment_distance(b, c, d),
               point_segment_distance(c, a, b), point_segment_distance(d, a, b))


def _strictly_inside(p, verts: np.ndarray) -> bool:
    """Even-odd crossing test; meaningful only away from the boundary."""
    x, y = p[0], p[1]
    xs, ys = verts[:, 0], verts[:, 1]
    xn, yn = np.roll(xs, -1), np.roll(ys, -1)
    cond = (ys > y) != (yn > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = xs + (y - ys) * (xn - xs) / (yn - ys)
    return bool(np.count_nonzero(cond & (x < xint)) % 2)


def boundary_distance(p, poly: Polygon) -> float:
    a, b = poly.edges()
    return float(np.min(points_segments_distance(np.asarray(p, float)[None, :], a, b)))


def point_in_polygon(p, poly: Polygon) -> Containment:
    p = as_point(p)
    if boundary_distance(p, poly) <= EPS_GEOM:
        return Containment.BOUNDARY
    return Containment.INSIDE if _strictly_inside(p, poly.vertices) else Containment.OUTSIDE


def point_polygon_distance(p, poly: Polygon) -> float:
    """Distance from p to the closed polygon region (0 inside)."""
    d = boundary_distance(p, poly)
    if d <= EPS_GEOM:
        return d
    return 0.0 if _strictly_inside(p, poly.vertices) else d


def segment_polygon_distance(a, b, poly: Polygon) -> float:
    """Distance from segment ab to the closed polygon region (0 if they meet)."""
    ea, eb = poly.edges()
    d = float(np.min(segments_distance(np.asarray(a, float)[None], np.asarray(b, float)[None], ea, eb)))
    if d > EPS_GEOM and _strictly_inside(a, poly.vertices):
        return 0.0
    return d


def segment_enters_interior(a, b, poly: Polygon) -> bool:
    """True if some part of segment ab lies strictly inside the polygon.

    The segment is split at every crossing with the polygon boundary and each
    piece's midpoint is tested, so boundary-hugging segments are not blocked.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    ts = [0.0, 1.0]
    ea, eb = poly.edges()
    for c, d in zip(ea, eb):
        hit = segment_intersect(Segment(a, b), Segment(c, d))
        if hit is None:
            continue
        pts = [np.array(hit.a), np.array(hit.b)] if isinstance(hit, Segment) else [hit]
        L2 = float((b - a) @ (b - a))
        if L2 == 0.0:
            continue
        for q in pts:
            ts.append(float((q - a) @ (b - a)) / L2)
    ts = np.unique(np.clip(ts, 0.0, 1.0))
    for t0, t1 in zip(ts[:-1], ts[1:]):
        if t1 - t0 <= 1e-12:
            continue
        m = a + 0.5 * (t0 + t1) * (b - a)
        if point_in_polygon(m, poly) is Containment.INSIDE:
            return True
    if len(ts) == 1:
        return point_in_polygon(a, poly) is Containment.INSIDE
    return False


def polygons_intersect(p: Polygon, q: Polygon) -> bool:
    """Closed-set intersection test for two simple polygons."""
    pa, pb = p.edges()
    qa, qb = q.edges()
    d = segments_distance_matrix(pa, pb, qa, qb)
    if np.any(d <= EPS_GEOM):
        return True
    return _strictly_inside(p.vertices[0], q.vertices) or _strictly_inside(q.vertices[0], p.vertices)


# --------------------------------------------------------------------------
# vectorised distances


def points_segments_distance(P: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Distances between every point in P (m, 2) and segment A[k]B[k] (n, 2).

    Returns an (m, n) array.
    """
    P = P[:, None, :]
    AB = (B - A)[None, :, :]
    AP = P - A[None, :, :]
    L2 = np.einsum("...i,...i->...", AB, AB)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(L2 > 0, np.einsum("...i,...i->...", AP, AB) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    D = AP - t[..., None] * AB
    return np.hypot(D[..., 0], D[..., 1])


def _pt_seg(P, A, B):
    # elementwise, all inputs broadcast to (..., 2)
    AB = B - A
    AP = P - A
    L2 = AB[..., 0] ** 2 + AB[..., 1] ** 2
    safe = np.where(L2 > 0, L2, 1.0)
    t = np.clip((AP[..., 0] * AB[..., 0] + AP[..., 1] * AB[..., 1]) / safe, 0.0, 1.0)
    t = np.where(L2 > 0, t, 0.0)
    dx = AP[..., 0] - t * AB[..., 0]
    dy = AP[..., 1] - t * AB[..., 1]
    return np.hypot(dx, dy)


def seg_seg_dist_broadcast(A, B, C, D) -> np.ndarray:
    """Elementwise distance between segments AB and CD (arrays broadcast to (..., 2))."""
    A, B, C, D = np.broadcast_arrays(A, B, C, D)

    def _or(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    o1, o2 = _or(A, B, C), _or(A, B, D)
    o3, o4 = _or(C, D, A), _or(C, D, B)
    proper = (((o1 > 0) & (o2 < 0)) | ((o1 < 0) & (o2 > 0))) & (((o3 > 0) & (o4 < 0)) | ((o3 < 0) & (o4 > 0)))
    d = np.minimum(np.minimum(_pt_seg(A, C, D), _pt_seg(B, C, D)),
                   np.minimum(_pt_seg(C, A, B), _pt_seg(D, A, B)))
    return np.where(proper, 0.0, d)


def segments_distance(A, B, C, D) -> np.ndarray:
    """Distances between segments A[i]B[i] (m) and C[j]D[j] (n) as an (m, n) array."""
    return seg_seg_dist_broadcast(A[:, None, :], B[:, None, :], C[None, :, :], D[None, :, :])


segments_distance_matrix = segments_distance


# --------------------------------------------------------------------------
# convex hull


def convex_hull(points: Sequence) -> Polygon:
    """Counter-clockwise convex hull (Andrew's monotone chain).

    Collinear boundary points are dropped, so hull vertices are extreme
    points of the input.

    Raises:
        DegenerateInputError: fewer than 3 distinct points, or all points
            within EPS_GEOM of a common line.
    """
    try:
        return Polygon(_hull_array(points))
    except SceneValidationError:
        raise DegenerateInputError("hull is thinner than EPS_GEOM") from None


def _hull_array(points) -> np.ndarray:
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        raise DegenerateInputError("convex hull needs at least 3 distinct points")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and orient(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    # drop vertices within EPS_GEOM of the chord between their neighbours
    changed = True
    while changed and len(hull) >= 3:
        changed = False
        for i in range(len(hull)):
            a, p, b = hull[i - 1], hull[i], hull[(i + 1) % len(hull)]
            if point_segment_distance(p, a, b) <= EPS_GEOM:
                del hull[i]
                changed = True
                break
    if len(hull) < 3:
        raise DegenerateInputError("all points are collinear")
    return np.array(hull)


# --------------------------------------------------------------------------
# penetration


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float


@dataclass(frozen=True)
class WideSegment:
    """Rectangle swept by segment ab with the given half-width."""
    a: tuple
    b: tuple
    half_width: float

    def corners(self) -> np.ndarray:
        a, b = np.asarray(self.a, float), np.asarray(self.b, float)
        d = b - a
        L = math.hypot(*d)
        if L <= EPS_GEOM:
            if self.half_width <= 0:
                return a[None, :]
            h = self.half_width
            return a + np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
        if self.half_width <= 0:
            return np.stack([a, b])
        n = np.array([-d[1], d[0]]) / L * self.half_width
        return np.stack([a - n, b - n, b + n, a + n])


@dataclass(frozen=True)
class Penetration:
    direction: np.ndarray
    depth: float

    @property
    def vector(self) -> np.ndarray:
        return self.direction * self.depth


def penetration_vector(probe: Union[Disk, WideSegment], poly: Polygon) -> Optional[Penetration]:
    """Minimum translation that separates a probe from a polygon.

    Args:
        probe: a Disk or a WideSegment (rectangle around a segment).
        poly: obstacle polygon, convex or not.

    Returns:
        Penetration(direction, depth) when the probe touches or overlaps the
        polygon, otherwise None. Among equally short translations the one
        with the smallest polar angle wins.
    """
    if isinstance(probe, Disk):
        return _disk_mtv(as_point(probe.center), float(probe.radius), poly)
    if isinstance(probe, WideSegment):
        return _rect_mtv(probe.corners(), poly)
    raise TypeError(f"unsupported probe {type(probe).__name__}")


def _pick(cands, origin):
    """cands: list of (point, natural_direction). Choose shortest, then polar angle."""
    best = None
    for x, nat in cands:
        v = x - origin
        depth = math.hypot(*v)
        direction = v / depth if depth > 1e-14 else nat
        key = (depth, polar_angle(direction))
        if best is None:
            best = (key, direction, depth)
            continue
        (bd, ba), _, _ = best
        if depth < bd - 1e-9 or (abs(depth - bd) <= 1e-9 and key[1] < ba - 1e-12):
            best = (key, direction, depth)
    if best is None:
        return None
    return Penetration(np.asarray(best[1], float), float(best[2]))


def _line_circle(p, d, c, r):
    # points p + s d (s in R) on circle |x - c| = r
    f = p - c
    A = d @ d
    B = 2 * f @ d
    C = f @ f - r * r
    disc = B * B - 4 * A * C
    if A == 0 or disc < 0:
        return []
    sq = math.sqrt(disc)
    return [(-B - sq) / (2 * A), (-B + sq) / (2 * A)]


def _disk_mtv(c: np.ndarray, r: float, poly: Polygon) -> Optional[Penetration]:
    if point_polygon_distance(c, poly) > r + EPS_GEOM:
        return None
    va, vb = poly.edges()
    normals = poly.outward_normals()
    n = len(va)
    cands = []

    # offset edges as (start, direction) with parameter range [0, 1]
    lines = [(va[i] + r * normals[i], vb[i] - va[i], normals[i]) for i in range(n)]
    for p0, d, nrm in lines:
        s = float(np.clip((c - p0) @ d / (d @ d), 0.0, 1.0))
        cands.append((p0 + s * d, nrm))

    prev_n = np.roll(normals, 1, axis=0)
    for j in range(n):
        bis = normals[j] + prev_n[j]
        bis = bis / np.linalg.norm(bis) if np.linalg.norm(bis) > 1e-12 else normals[j]
        if r > 0:
            w = c - va[j]
            nw = math.hypot(*w)
            dirv = w / nw if nw > 1e-14 else bis
            cands.append((va[j] + r * dirv, dirv))
        else:
            cands.append((va[j].copy(), bis))

    # junctions between offset pieces (matter for concave polygons)
    for i in range(n):
        p0, d0, n0 = lines[i]
        for k in range(i + 1, n):
            p1, d1, n1 = lines[k]
            den = cross2(d0, d1)
            if abs(den) > 1e-14:
                s = cross2(p1 - p0, d1) / den
                t = cross2(p1 - p0, d0) / den
                if -1e-12 <= s <= 1 + 1e-12 and -1e-12 <= t <= 1 + 1e-12:
                    cands.append((p0 + s * d0, unit(n0 + n1) if np.linalg.norm(n0 + n1) > 1e-12 else n0))
        if r > 0:
            for j in range(n):
                for s in _line_circle(p0, d0, va[j], r):
                    if -1e-12 <= s <= 1 + 1e-12:
                        cands.append((p0 + s * d0, n0))
    if r > 0:
        for i in range(n):
            for j in range(i + 1, n):
                ci, cj = va[i], va[j]
                dd = _dist(ci, cj)
                if dd == 0 or dd > 2 * r:
                    continue
                m = 0.5 * (ci + cj)
                h = math.sqrt(max(r * r - (dd / 2) ** 2, 0.0))
                perp = np.array([-(cj - ci)[1], (cj - ci)[0]]) / dd
                for x in (m + h * perp, m - h * perp):
                    cands.append((x, perp))

    tol = 1e-9 * max(1.0, r)
    feasible = []
    for x, nat in cands:
        bd = boundary_distance(x, poly)
        if bd < r - tol:
            continue
        if bd > EPS_GEOM and _strictly_inside(x, poly.vertices):
            continue
        feasible.append((x, nat))
    pen = _pick(feasible, c)
    if pen is None:
        return _directional_mtv(lambda t: point_polygon_distance(c + t, poly) >= r - tol)
    return pen


def ear_clip(poly: Polygon) -> list:
    """Triangulate a simple CCW polygon; returns index triples."""
    cached = getattr(poly, "_ears", None)
    if cached is None:
        cached = _ear_clip(poly)
        poly._ears = cached
    return list(cached)


def _ear_clip(poly: Polygon) -> list:
    v = poly.vertices
    idx = list(range(len(v)))
    tris = []
    guard = 0
    while len(idx) > 3 and guard < 10 * len(v) ** 2:
        guard += 1
        m = len(idx)
        clipped = False
        for k in range(m):
            i0, i1, i2 = idx[(k - 1) % m], idx[k], idx[(k + 1) % m]
            a, b, c = v[i0], v[i1], v[i2]
            if orient(a, b, c) <= EPS_GEOM:
                continue
            ok = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = v[j]
                if orient(a, b, p) >= -EPS_GEOM and orient(b, c, p) >= -EPS_GEOM and orient(c, a, p) >= -EPS_GEOM:
                    ok = False
                    break
            if ok:
                tris.append((i0, i1, i2))
                idx.pop(k)
                clipped = True
                break
        if not clipped:
            # only collinear leftovers remain
            break
    if len(idx) == 3 and orient(v[idx[0]], v[idx[1]], v[idx[2]]) > EPS_GEOM:
        tris.append(tuple(idx))
    return tris


def _hull_points(pts: np.ndarray) -> np.ndarray:
    return _hull_array(pts)


def _inside_convex_strict(x, hv: np.ndarray, tol: float) -> bool:
    a, b = hv, np.roll(hv, -1, axis=0)
    e = b - a
    L = np.hypot(e[:, 0], e[:, 1])
    s = (e[:, 0] * (x[1] - a[:, 1]) - e[:, 1] * (x[0] - a[:, 0])) / L
    return bool(np.all(s > tol))


def _rect_mtv(shape_pts: np.ndarray, poly: Polygon) -> Optional[Penetration]:
    """MTV of a convex point set (its hull) against a possibly concave polygon.

    The obstacle's configuration-space image is the union over ear triangles
    T of T - shape; the answer is the nearest point of its complement.
    """
    v = poly.vertices
    pieces = []
    for tri in ear_clip(poly):
        T = v[list(tri)]
        sums = (T[:, None, :] - shape_pts[None, :, :]).reshape(-1, 2)
        pieces.append(_hull_points(sums))
    origin = np.zeros(2)

    # quick rejection: origin outside (or on) every piece with positive gap
    touching = False
    for hv in pieces:
        if _inside_convex_strict(origin, hv, -EPS_GEOM):
            touching = True
            break
    if not touching:
        return None

    cands = []
    edges = []
    for hv in pieces:
        a, b = hv, np.roll(hv, -1, axis=0)
        for p0, p1 in zip(a, b):
            d = p1 - p0
            nrm = unit(np.array([d[1], -d[0]]))
            s = float(np.clip((origin - p0) @ d / (d @ d), 0.0, 1.0))
            cands.append((p0 + s * d, nrm))
            cands.append((p0.copy(), nrm))
            edges.append((p0, d, nrm))
    for i in range(len(edges)):
        p0, d0, n0 = edges[i]
        for k in range(i + 1, len(edges)):
            p1, d1, n1 = edges[k]
            den = cross2(d0, d1)
            if abs(den) <= 1e-14:
                continue
            s = cross2(p1 - p0, d1) / den
            t = cross2(p1 - p0, d0) / den
            if 0 <= s <= 1 and 0 <= t <= 1:
                cands.append((p0 + s * d0, n0))
    feasible = [(x, nat) for x, nat in cands
                if not any(_inside_convex_strict(x, hv, 1e-10) for hv in pieces)]
    return _pick(feasible, origin)


def _directional_mtv(is_clear, n_dirs: int = 720, reach: float = 1e3) -> Optional[Penetration]:
    """Fallback: shortest clearing translation over sampled directions."""
    best = None
    for k in range(n_dirs):
        th = 2 * math.pi * k / n_dirs
        u = np.array([math.cos(th), math.sin(th)])
        step = 1e-3
        s_prev, s = 0.0, step
        while s < reach and not is_clear(s * u):
            s_prev, s = s, s * 2
        if s >= reach:
            continue
        lo, hi = s_prev, s
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if is_clear(mid * u):
                hi = mid
            else:
                lo = mid
        if best is None or hi < best[1] - 1e-12:
            best = (u, hi)
    if best is None:
        return None
    return Penetration(best[0], best[1])


def directional_mtv(is_clear, n_dirs: int = 720) -> Optional[Penetration]:
    return _directional_mtv(is_clear, n_dirs=n_dirs)


def polyline_length(pts) -> float:
    pts = np.asarray(pts, float)
    if len(pts) < 2:
        return 0.0
    return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))
