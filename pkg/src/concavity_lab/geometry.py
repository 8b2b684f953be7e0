"""Bounded convex planar domains.

A domain is stored as an outer convex polygon ``Q`` together with a rounding
radius ``r``.  The represented set is the opening ``(Q - B_r) + B_r``: the
polygon eroded by ``r`` (the *core*) and dilated back by a disk of radius
``r``.  With ``r = 0`` the domain is the polygon itself.  Because curved arcs
are never resampled, the signed distance is exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize_scalar

GEOM_TOL = 1e-12
OPENING_INSET = 1.0 / 16.0


class GeometryError(ValueError):
    """Invalid domain or an operation that would produce an empty set."""


def polygon_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _dedupe(vertices: np.ndarray) -> np.ndarray:
    """Drop repeated and collinear vertices of a closed polygon."""
    pts = [p for i, p in enumerate(vertices)
           if np.linalg.norm(p - vertices[i - 1]) > GEOM_TOL]
    if len(pts) < 3:
        return np.array(pts, dtype=float).reshape(-1, 2)
    changed = True
    while changed and len(pts) >= 3:
        changed = False
        for i in range(len(pts)):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
            cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if abs(cross) <= GEOM_TOL * max(1.0, np.linalg.norm(c - a)):
                del pts[i]
                changed = True
                break
    return np.array(pts, dtype=float).reshape(-1, 2)


def halfplanes(vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit outward normals ``n`` and offsets ``c`` with ``n.x <= c`` inside."""
    edges = np.roll(vertices, -1, axis=0) - vertices
    normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    offsets = np.einsum("ij,ij->i", normals, vertices)
    return normals, offsets


def _clip(poly: list, n: np.ndarray, c: float) -> list:
    """Sutherland-Hodgman clip of a polygon against ``n.x <= c``."""
    out = []
    m = len(poly)
    for i in range(m):
        a, b = poly[i], poly[(i + 1) % m]
        fa, fb = n @ a - c, n @ b - c
        if fa <= 0:
            out.append(a)
        if (fa < 0 < fb) or (fb < 0 < fa):
            s = fa / (fa - fb)
            out.append(a + s * (b - a))
    return out


def erode_polygon(vertices: np.ndarray, delta: float) -> np.ndarray:
    """Inner parallel polygon: every edge moved inward by ``delta``.

    May return fewer than three vertices when the erosion degenerates to a
    segment or point; an empty array means the result is empty.
    """
    if delta == 0:
        return vertices.copy()
    normals, offsets = halfplanes(vertices)
    poly = [np.asarray(v, dtype=float) for v in vertices]
    for n, c in zip(normals, offsets - delta):
        poly = _clip(poly, n, c)
        if not poly:
            return np.zeros((0, 2))
    return _dedupe(np.array(poly))


def polygon_inradius(vertices: np.ndarray) -> float:
    """Radius of the largest inscribed disk (Chebyshev centre LP)."""
    normals, offsets = halfplanes(vertices)
    a_ub = np.hstack([normals, np.ones((len(normals), 1))])
    res = linprog([0.0, 0.0, -1.0], A_ub=a_ub, b_ub=offsets,
                  bounds=[(None, None), (None, None), (0, None)], method="highs")
    if not res.success:
        raise GeometryError("could not compute inradius")
    return float(res.x[2])


def _segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    ap = points - a
    if denom == 0.0:
        return np.linalg.norm(ap, axis=-1)
    s = np.clip((ap @ ab) / denom, 0.0, 1.0)
    return np.linalg.norm(ap - s[..., None] * ab, axis=-1)


def polygon_signed_distance(vertices: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Signed distance to a convex polygon, positive inside.

    Degenerate polygons (segment or point) have no interior, so the result is
    minus the Euclidean distance to the set.
    """
    points = np.asarray(points, dtype=float)
    m = len(vertices)
    outside = np.full(points.shape[:-1], np.inf)
    for i in range(max(m, 1)):
        a = vertices[i]
        b = vertices[(i + 1) % m] if m > 1 else a
        outside = np.minimum(outside, _segment_distance(points, a, b))
    if m < 3:
        return -outside
    normals, offsets = halfplanes(vertices)
    slack = offsets - points @ normals.T
    inner = slack.min(axis=-1)
    return np.where(inner >= 0, inner, -outside)


@dataclass(frozen=True)
class ConvexDomain:
    vertices: np.ndarray
    rounding_radius: float = 0.0
    _core: np.ndarray = field(init=False, repr=False, compare=False)
    _inradius: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise GeometryError("a polygon needs at least three vertices")
        if polygon_area(v) < 0:
            v = v[::-1].copy()
        edges = np.roll(v, -1, axis=0) - v
        cross = edges[:, 0] * np.roll(edges[:, 1], -1) - edges[:, 1] * np.roll(edges[:, 0], -1)
        if np.any(cross < -GEOM_TOL):
            raise GeometryError("polygon is not convex")
        v = _dedupe(v)
        if len(v) < 3 or polygon_area(v) <= GEOM_TOL:
            raise GeometryError("polygon has empty interior")
        v.setflags(write=False)
        r = float(self.rounding_radius)
        inr = polygon_inradius(v)
        if r < 0 or r >= inr:
            raise GeometryError(f"rounding radius {r} must lie in [0, inradius={inr})")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "rounding_radius", r)
        object.__setattr__(self, "_inradius", inr)
        object.__setattr__(self, "_core", erode_polygon(v, r))

    @property
    def core(self) -> np.ndarray:
        return self._core

    @property
    def inradius(self) -> float:
        return self._inradius

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        r = self.rounding_radius
        return self._core.min(axis=0) - r, self._core.max(axis=0) + r

    def area(self) -> float:
        core, r = self._core, self.rounding_radius
        # a two-point core is traversed there and back, so this is twice its length
        perim = float(np.sum(np.linalg.norm(np.roll(core, -1, axis=0) - core, axis=1)))
        base = polygon_area(core) if len(core) >= 3 else 0.0
        return base + perim * r + math.pi * r * r

    def support(self, directions: np.ndarray) -> np.ndarray:
        return (directions @ self._core.T).max(axis=-1) + self.rounding_radius

    def contains(self, points, tol: float = GEOM_TOL) -> np.ndarray:
        return signed_distance(self, points) >= -tol


@dataclass(frozen=True)
class IntervalDomain:
    a: float
    b: float

    def __post_init__(self):
        if not self.b - self.a > 0:
            raise GeometryError("interval needs a < b")

    @property
    def inradius(self) -> float:
        return 0.5 * (self.b - self.a)

    def bounds(self):
        return self.a, self.b


def signed_distance(domain, point) -> np.ndarray | float:
    """Distance to the boundary, positive inside and negative outside."""
    if isinstance(domain, IntervalDomain):
        x = np.asarray(point, dtype=float)
        out = np.minimum(x - domain.a, domain.b - x)
        return float(out) if out.ndim == 0 else out
    pts = np.asarray(point, dtype=float)
    out = domain.rounding_radius + polygon_signed_distance(domain.core, pts)
    return float(out) if pts.ndim == 1 else out


def inner_parallel(domain, delta: float):
    """The set of points at distance greater than ``delta`` from the boundary."""
    if not 0 < delta < domain.inradius:
        raise GeometryError(f"delta={delta} leaves an empty domain (inradius {domain.inradius})")
    if isinstance(domain, IntervalDomain):
        return IntervalDomain(domain.a + delta, domain.b - delta)
    return ConvexDomain(erode_polygon(domain.vertices, delta),
                        max(domain.rounding_radius - delta, 0.0))


def rounded_opening(domain: ConvexDomain, radius: float, inset: float = OPENING_INSET) -> ConvexDomain:
    """Erode by ``radius`` then dilate by ``radius*(1-inset)``.

    Corners become arcs of radius at most ``radius`` so the boundary curvature
    is at least ``1/radius`` there, and the result sits inside the input.
    """
    if not 0 < radius < domain.inradius:
        raise GeometryError(f"radius={radius} must lie in (0, inradius={domain.inradius})")
    shift = radius * inset
    return ConvexDomain(erode_polygon(domain.vertices, shift),
                        max(domain.rounding_radius, radius) - shift)


def hausdorff_distance(d1: ConvexDomain, d2: ConvexDomain, samples: int = 4096) -> float:
    """Hausdorff distance of two convex bodies via their support functions."""
    theta = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)

    def gap(t):
        u = np.stack([np.cos(t), np.sin(t)], axis=-1)
        return np.abs(d1.support(u) - d2.support(u))

    vals = gap(theta)
    best = float(vals.max())
    step = theta[1] - theta[0]
    for k in np.argsort(vals)[-8:]:
        res = minimize_scalar(lambda t: -float(gap(np.array([t]))[0]),
                              bounds=(theta[k] - step, theta[k] + step),
                              method="bounded", options={"xatol": 1e-13})
        best = max(best, -float(res.fun))
    return 0.0 if best <= GEOM_TOL else best


def regular_polygon(n: int, radius: float = 1.0, center=(0.0, 0.0)) -> np.ndarray:
    t = 2 * math.pi * np.arange(n) / n
    return np.stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], axis=1)


UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])


def preset(name: str) -> ConvexDomain:
    """Named domains used in configs.

    ``square`` is [0,1]^2, ``disk`` the unit disk as a 256-gon, ``triangle`` the
    equilateral triangle of side 1, ``thin-rectangle(a)`` is [0,1]x[0,1/a] and
    ``rounded-square(k)`` the opening of the square with radius 0.5/2^k.
    """
    name = name.strip()
    if name == "square":
        return ConvexDomain(UNIT_SQUARE)
    if name == "disk":
        return ConvexDomain(regular_polygon(256))
    if name == "triangle":
        return ConvexDomain(TRIANGLE)
    m = re.fullmatch(r"thin-rectangle\(\s*([0-9.eE+-]+)\s*\)", name)
    if m:
        aspect = float(m.group(1))
        if aspect < 1:
            raise GeometryError("aspect must be >= 1")
        return ConvexDomain(np.array([[0, 0], [1, 0], [1, 1 / aspect], [0, 1 / aspect]], float))
    m = re.fullmatch(r"rounded-square\(\s*([0-9]+)\s*\)", name)
    if m:
        return rounded_opening(ConvexDomain(UNIT_SQUARE), 0.5 / 2 ** int(m.group(1)))
    raise GeometryError(f"unknown domain preset {name!r}")


def domain_from_literal(lit):
    """Build a domain from a config literal (preset name, polygon or interval)."""
    if isinstance(lit, str):
        return preset(lit)
    if isinstance(lit, dict):
        if "interval" in lit:
            a, b = lit["interval"]
            return IntervalDomain(float(a), float(b))
        if "polygon" in lit:
            return ConvexDomain(np.array(lit["polygon"], float), float(lit.get("rounding", 0.0)))
    raise GeometryError(f"cannot interpret domain literal {lit!r}")


def domain_to_literal(domain) -> dict:
    if isinstance(domain, IntervalDomain):
        return {"interval": [domain.a, domain.b]}
    return {"polygon": domain.vertices.tolist(), "rounding": domain.rounding_radius}
