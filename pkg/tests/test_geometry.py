import math

import numpy as np
import pytest

from concavity_lab.geometry import (ConvexDomain, GeometryError, IntervalDomain, domain_from_literal,
                                    domain_to_literal, hausdorff_distance, inner_parallel, preset,
                                    regular_polygon, rounded_opening, signed_distance)

SQUARE = preset("square")


def test_square_distances():
    assert signed_distance(SQUARE, np.array([0.5, 0.5])) == pytest.approx(0.5)
    assert signed_distance(SQUARE, np.array([0.0, 0.5])) == pytest.approx(0.0, abs=1e-15)
    assert signed_distance(SQUARE, np.array([1.5, 0.5])) == pytest.approx(-0.5)


def test_disk_polygon_distance():
    disk = preset("disk")
    d = signed_distance(disk, np.array([0.5, 0.0]))
    # the 256-gon sits inside the unit circle by at most 1 - cos(pi/256)
    assert abs(d - 0.5) <= 1 - math.cos(math.pi / 256) + 1e-12


def test_inner_parallel_square():
    inner = inner_parallel(SQUARE, 0.25)
    assert np.allclose(sorted(map(tuple, inner.vertices)),
                       sorted([(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75)]))
    assert inner_parallel(SQUARE, 0.1).area() == pytest.approx(0.64)


def test_inner_parallel_rejects_inradius():
    tri = preset("triangle")
    with pytest.raises(GeometryError):
        inner_parallel(tri, tri.inradius)


def test_erosion_monotone():
    d1 = inner_parallel(SQUARE, 0.1)
    d2 = inner_parallel(SQUARE, 0.2)
    assert np.all(d1.contains(d2.vertices))


def test_hausdorff_examples():
    assert hausdorff_distance(SQUARE, preset("square")) == 0.0
    assert hausdorff_distance(SQUARE, inner_parallel(SQUARE, 0.1)) == pytest.approx(0.1 * math.sqrt(2), rel=1e-9)
    moved = ConvexDomain(SQUARE.vertices + np.array([4.0, 0.0]))
    assert hausdorff_distance(SQUARE, moved) >= 3


def test_rounded_opening_square():
    r = 0.2
    op = rounded_opening(SQUARE, r)
    tau = 1 / 16
    assert op.rounding_radius == pytest.approx(r * (1 - tau))
    # straight edges inset by r*tau
    assert signed_distance(op, np.array([0.5, r * tau])) == pytest.approx(0.0, abs=1e-14)
    # corner arc centred at (r, r)
    corner = np.array([r, r]) - r * (1 - tau) / math.sqrt(2)
    assert signed_distance(op, corner) == pytest.approx(0.0, abs=1e-14)
    boundary = np.array([[0.5, r * tau], corner])
    assert np.all(SQUARE.contains(boundary))


def test_rounded_opening_hausdorff_small():
    disk = preset("disk")
    r = 0.05
    assert hausdorff_distance(disk, rounded_opening(disk, r)) <= r


def test_rounded_opening_rejects_zero():
    with pytest.raises(GeometryError):
        rounded_opening(SQUARE, 0.0)


def test_rounding_must_stay_below_inradius():
    with pytest.raises(GeometryError):
        ConvexDomain(SQUARE.vertices, 0.6)


def test_nonconvex_rejected():
    v = np.array([[0, 0], [1, 0], [0.2, 0.2], [0, 1]], float)
    with pytest.raises(GeometryError):
        ConvexDomain(v)


def test_literals_round_trip():
    dom = domain_from_literal({"polygon": regular_polygon(6).tolist(), "rounding": 0.1})
    again = domain_from_literal(domain_to_literal(dom))
    assert hausdorff_distance(dom, again) == 0.0
    assert domain_from_literal({"interval": [-1, 1]}) == IntervalDomain(-1.0, 1.0)
    thin = domain_from_literal("thin-rectangle(4)")
    assert thin.inradius == pytest.approx(0.125)
    with pytest.raises(GeometryError):
        domain_from_literal("pentagon")


def test_distance_concave_along_segments():
    rng = np.random.default_rng(3)
    dom = preset("triangle")
    lo, hi = dom.bounds()
    pts = rng.uniform(lo, hi, size=(4000, 2))
    pts = pts[dom.contains(pts)]
    x, y = pts[: len(pts) // 2], pts[len(pts) // 2: 2 * (len(pts) // 2)]
    lam = rng.uniform(0, 1, size=(len(x), 1))
    z = lam * x + (1 - lam) * y
    lhs = signed_distance(dom, z)
    rhs = lam[:, 0] * signed_distance(dom, x) + (1 - lam[:, 0]) * signed_distance(dom, y)
    assert np.all(lhs >= rhs - 1e-10)


def test_distance_strictly_quasiconcave_on_rounded_domain():
    dom = rounded_opening(SQUARE, 0.25)
    # two points on the level set d = 0.1 that are not on a common flat edge
    a = np.array([0.1, 0.5])
    b = np.array([0.5, 0.9])
    da, db = signed_distance(dom, a), signed_distance(dom, b)
    assert da == pytest.approx(db, abs=1e-14)
    assert signed_distance(dom, (a + b) / 2) > min(da, db)
