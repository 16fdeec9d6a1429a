"""Planar geometry primitives: halfplanes, convex polygons, lines, polygons.

Points are plain ``numpy`` arrays of shape ``(2,)``; vertex lists are
``(k, 2)`` arrays.  All tolerances are absolute and in meters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, DegenerateInput, EmptyPolytope, Unbounded

TOL = 1e-9
PARALLEL_TOL = 1e-6

# Half-width of the seed square that enumerate_vertices clips down.
_FAR = 1e7


def as_point(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(p)):
        raise DegenerateInput(f"non-finite point {p}")
    return p


def cross(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = float(np.hypot(v[0], v[1]))
    if n <= TOL:
        raise DegenerateInput("cannot normalize a zero vector")
    return v / n


@dataclass(frozen=True)
class Halfplane:
    """The set ``{p : normal . p <= offset}`` with a unit ``normal``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(2)
        norm = float(np.hypot(n[0], n[1]))
        if norm <= TOL:
            raise DegenerateInput("halfplane normal is zero")
        object.__setattr__(self, "normal", n / norm)
        object.__setattr__(self, "offset", float(self.offset) / norm)

    def value(self, p) -> np.ndarray:
        """Signed distance ``normal . p - offset`` (negative inside)."""
        return np.asarray(p, dtype=float) @ self.normal - self.offset

    def contains(self, p, tol: float = TOL):
        return self.value(p) <= tol

    def key(self):
        return (float(self.normal[0]), float(self.normal[1]), self.offset)


@dataclass(frozen=True)
class Ray2:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", as_point(self.origin))
        object.__setattr__(self, "direction", unit(as_point(self.direction)))


@dataclass
class Polytope2:
    """Bounded convex polygon kept both as halfplanes and as CCW vertices."""

    halfplanes: list
    vertices: np.ndarray

    @classmethod
    def from_halfplanes(cls, halfplanes) -> "Polytope2":
        halfplanes = list(halfplanes)
        return cls(halfplanes, enumerate_vertices(halfplanes))

    @classmethod
    def box(cls, xmin, ymin, xmax, ymax) -> "Polytope2":
        return cls.from_halfplanes(box_halfplanes(xmin, ymin, xmax, ymax))

    def contains(self, p, tol: float = TOL) -> bool:
        p = np.asarray(p, dtype=float)
        return all(h.value(p) <= tol for h in self.halfplanes)

    def contains_many(self, pts, tol: float = TOL) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        ok = np.ones(len(pts), dtype=bool)
        for h in self.halfplanes:
            ok &= pts @ h.normal - h.offset <= tol
        return ok

    def sample(self, rng, n: int) -> np.ndarray:
        """Uniform samples via fan triangulation of the vertex list."""
        v = self.vertices
        tris = [(v[0], v[k], v[k + 1]) for k in range(1, len(v) - 1)]
        areas = np.array([abs(cross(b - a, c - a)) / 2 for a, b, c in tris])
        idx = rng.choice(len(tris), size=n, p=areas / areas.sum())
        r1 = np.sqrt(rng.random(n))
        r2 = rng.random(n)
        a = np.array([tris[k][0] for k in idx])
        b = np.array([tris[k][1] for k in idx])
        c = np.array([tris[k][2] for k in idx])
        return (1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b + (r1 * r2)[:, None] * c

    def area(self) -> float:
        return polygon_area(self.vertices)


def box_halfplanes(xmin, ymin, xmax, ymax):
    return [
        Halfplane(np.array([-1.0, 0.0]), -xmin),
        Halfplane(np.array([1.0, 0.0]), xmax),
        Halfplane(np.array([0.0, -1.0]), -ymin),
        Halfplane(np.array([0.0, 1.0]), ymax),
    ]


def bisector(a, b) -> Halfplane:
    """Halfplane containing ``a`` bounded by the perpendicular bisector of ab."""
    a, b = as_point(a), as_point(b)
    d = b - a
    dist = float(np.hypot(d[0], d[1]))
    if dist <= TOL:
        raise DegenerateInput("bisector of coincident points")
    n = d / dist
    return Halfplane(n, float(n @ (a + b) / 2.0))


def intersect_lines(r1: Ray2, r2: Ray2) -> np.ndarray:
    """Intersection of the infinite lines carried by two rays."""
    den = cross(r1.direction, r2.direction)
    if abs(den) <= PARALLEL_TOL:
        raise DegenerateGeometry("lines are (near-)parallel")
    s = cross(r2.origin - r1.origin, r2.direction) / den
    return r1.origin + s * r1.direction


def intersect_lines_many(o1, d1, o2, d2):
    """Row-wise line intersections for stacked origins/directions.

    Returns ``(points, sines)``; rows with ``|sine| <= PARALLEL_TOL`` are NaN.
    Directions must already be unit length.
    """
    o1, d1, o2, d2 = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (o1, d1, o2, d2))
    den = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    w = o2 - o1
    num = w[:, 0] * d2[:, 1] - w[:, 1] * d2[:, 0]
    bad = np.abs(den) <= PARALLEL_TOL
    s = np.divide(num, den, out=np.full_like(num, np.nan), where=~bad)
    return o1 + s[:, None] * d1, den


def _line_point(h1: Halfplane, h2: Halfplane):
    if h2.key() < h1.key():
        h1, h2 = h2, h1
    det = cross(h1.normal, h2.normal)
    if abs(det) <= 1e-15:
        return None
    x = (h1.offset * h2.normal[1] - h2.offset * h1.normal[1]) / det
    y = (h1.normal[0] * h2.offset - h2.normal[0] * h1.offset) / det
    return np.array([x, y])


def enumerate_vertices(halfplanes) -> np.ndarray:
    """CCW vertices of the intersection of ``halfplanes``.

    A large square is clipped by each halfplane in turn while remembering which
    line carries every edge, so each vertex is always the exact intersection of
    its two adjacent edge lines.  The result starts at the lowest (then
    leftmost) vertex and does not depend on input order.
    """
    hps = list(halfplanes)
    if not hps:
        raise Unbounded("no halfplanes")
    lines = box_halfplanes(-_FAR, -_FAR, _FAR, _FAR) + hps
    n_seed = 4
    # CCW from (-F,-F): bottom, right, top, left
    labels = [2, 1, 3, 0]
    poly = [
        np.array([-_FAR, -_FAR]),
        np.array([_FAR, -_FAR]),
        np.array([_FAR, _FAR]),
        np.array([-_FAR, _FAR]),
    ]

    def cut(p, q, dp, dq, edge_line, clip_line):
        r = _line_point(lines[edge_line], lines[clip_line])
        if r is None:
            r = p + (dp / (dp - dq)) * (q - p)
        return r

    for idx in range(n_seed, len(lines)):
        h = lines[idx]
        out, out_lab = [], []
        n = len(poly)
        vals = [h.value(p) for p in poly]
        for k in range(n):
            p, q = poly[k], poly[(k + 1) % n]
            dp, dq = vals[k], vals[(k + 1) % n]
            if dp <= TOL:
                out.append(p)
                out_lab.append(labels[k])
                if dq > TOL:
                    out.append(cut(p, q, dp, dq, labels[k], idx))
                    out_lab.append(idx)
            elif dq <= TOL:
                out.append(cut(p, q, dp, dq, labels[k], idx))
                out_lab.append(labels[k])
        poly, labels = out, out_lab
        if len(poly) < 3:
            raise EmptyPolytope("halfplanes have empty intersection")

    verts, vlabels = [], []
    for k in range(len(poly)):
        a, b = labels[k - 1], labels[k]
        if a == b:
            continue
        p = _line_point(lines[a], lines[b])
        if p is None:
            continue
        verts.append(p)
        vlabels.append((a, b))
    merged, mlab = [], []
    for p, lab in zip(verts, vlabels):
        if not merged or np.max(np.abs(p - merged[-1])) > TOL:
            merged.append(p)
            mlab.append(lab)
    while len(merged) > 1 and np.max(np.abs(merged[0] - merged[-1])) <= TOL:
        merged.pop()
        mlab.pop()
    if len(merged) < 3 or polygon_area(np.array(merged)) <= 1e-12:
        raise EmptyPolytope("halfplane intersection is degenerate")
    if any(a < n_seed or b < n_seed for a, b in mlab):
        raise Unbounded("halfplane intersection is unbounded")
    v = np.array(merged) + 0.0  # drop negative zeros
    start = min(range(len(v)), key=lambda k: (v[k, 1], v[k, 0]))
    return np.roll(v, -start, axis=0)


def polygon_area(v) -> float:
    v = np.asarray(v, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def point_segment_distance(p, a, b):
    """Distance from points ``p`` (k,2) to segment ab."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return np.hypot(*(p - a).T)
    t = np.clip((p - a) @ d / dd, 0.0, 1.0)
    proj = a + t[:, None] * d
    return np.hypot(*(p - proj).T)


def _edges(poly):
    poly = np.asarray(poly, dtype=float)
    return poly, np.roll(poly, -1, axis=0)


def polygon_boundary_distance(p, poly):
    """Distance from each point to the closed polygon boundary."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    a, b = _edges(poly)
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    dd[dd == 0.0] = 1.0
    w = p[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("kmj,mj->km", w, d) / dd, 0.0, 1.0)
    r = w - t[..., None] * d[None, :, :]
    return np.sqrt(np.min(np.einsum("kmj,kmj->km", r, r), axis=1))


def winding_number(p, poly) -> np.ndarray:
    """Winding number of the closed polygon ``poly`` around each point."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    a, b = _edges(poly)
    px, py = p[:, 0:1], p[:, 1:2]
    x0, y0, x1, y1 = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    side = (x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)
    up = (y0 <= py) & (y1 > py) & (side > 0)
    down = (y0 > py) & (y1 <= py) & (side < 0)
    return up.sum(axis=1) - down.sum(axis=1)


def in_polygon(p, poly, tol: float = TOL) -> np.ndarray:
    """Closed point-in-polygon test: boundary points count as inside."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    poly = np.asarray(poly, dtype=float)
    lo, hi = poly.min(axis=0) - tol, poly.max(axis=0) + tol
    inside = np.zeros(len(p), dtype=bool)
    cand = np.all((p >= lo) & (p <= hi), axis=1)
    if not cand.any():
        return inside
    q = p[cand]
    hit = winding_number(q, poly) != 0
    rest = ~hit
    if rest.any():
        hit[rest] = polygon_boundary_distance(q[rest], poly) <= tol
    inside[cand] = hit
    return inside


def segment_samples(a, b, step: float) -> np.ndarray:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    length = float(np.hypot(*(b - a)))
    n = max(int(np.ceil(length / step)), 1) + 1
    t = np.linspace(0.0, 1.0, n)
    return a + t[:, None] * (b - a)


class ObstacleSet:
    """All obstacle edges stacked so a batch of points is tested in one pass."""

    def __init__(self, polygons):
        polys = [np.asarray(q, dtype=float).reshape(-1, 2) for q in polygons]
        self.polygons = polys
        if polys:
            self.a = np.concatenate([q for q in polys])
            self.b = np.concatenate([np.roll(q, -1, axis=0) for q in polys])
            ids = np.concatenate([np.full(len(q), k) for k, q in enumerate(polys)])
            self.member = (ids[:, None] == np.arange(len(polys))[None, :]).astype(int)
            self.lo = np.min(self.a, axis=0)
            self.hi = np.max(self.a, axis=0)
        self.d = self.b - self.a if polys else None
        self.length = np.hypot(self.d[:, 0], self.d[:, 1]) if polys else None

    def __len__(self):
        return len(self.polygons)

    def _dist2(self, p):
        d = self.d
        dd = np.einsum("ij,ij->i", d, d)
        dd = np.where(dd == 0.0, 1.0, dd)
        w = p[:, None, :] - self.a[None, :, :]
        t = np.clip(np.einsum("kmj,mj->km", w, d) / dd, 0.0, 1.0)
        r = w - t[..., None] * d[None, :, :]
        return np.einsum("kmj,kmj->km", r, r)

    def contains(self, p, tol: float = TOL) -> np.ndarray:
        """Closed membership in the union of the obstacles."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        if not self.polygons:
            return np.zeros(len(p), dtype=bool)
        dx = p[:, 0:1] - self.a[:, 0]
        dy = p[:, 1:2] - self.a[:, 1]
        ex, ey = self.d[:, 0], self.d[:, 1]
        side = ex * dy - dx * ey
        above0 = dy >= 0
        above1 = (p[:, 1:2] - self.b[:, 1]) >= 0
        # +1 for upward crossings with the point on the left, -1 for downward on the right
        wn = (above0 & ~above1 & (side > 0)).view(np.int8) - (~above0 & above1 & (side < 0)).view(np.int8)
        hit = np.any(wn.astype(np.int64) @ self.member != 0, axis=1)
        near = np.abs(side) <= tol * self.length
        if near.any():
            hit |= np.min(self._dist2(p), axis=1) <= tol * tol
        return hit

    def distance(self, p) -> np.ndarray:
        """Distance from each point to the nearest obstacle boundary."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        if not self.polygons:
            return np.full(len(p), np.inf)
        return np.sqrt(np.min(self._dist2(p), axis=1))


def segment_clear(a, b, env, step: float, clearance: float = 0.0) -> bool:
    """True iff samples every ``step`` along ab are free and inside bounds.

    ``env`` needs ``bounds_box`` (xmin, ymin, xmax, ymax) and ``obstacles``.
    With ``clearance > 0`` samples must also keep that distance from every
    obstacle boundary.
    """
    if step <= 0:
        raise DegenerateInput("step must be positive")
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    pts = segment_samples(a, b, step)
    xmin, ymin, xmax, ymax = env.bounds_box
    if np.any((pts[:, 0] < xmin - TOL) | (pts[:, 0] > xmax + TOL)
              | (pts[:, 1] < ymin - TOL) | (pts[:, 1] > ymax + TOL)):
        return False
    obs = getattr(env, "obstacle_set", None)
    if obs is None:
        obs = ObstacleSet(env.obstacles)
    if not len(obs):
        return True
    if np.any(np.maximum(a, b) + clearance < obs.lo) or np.any(np.minimum(a, b) - clearance > obs.hi):
        return True
    if np.any(obs.contains(pts)):
        return False
    if clearance > 0 and np.any(obs.distance(pts) < clearance):
        return False
    return True


def point_polygon_distance(p, vertices) -> float:
    """Distance from ``p`` to a convex polygon (0 when inside or on it)."""
    p = as_point(p)
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    inside = all(cross(v[(k + 1) % n] - v[k], p - v[k]) >= 0 for k in range(n))
    if inside:
        return 0.0
    return float(polygon_boundary_distance(p, v)[0])
