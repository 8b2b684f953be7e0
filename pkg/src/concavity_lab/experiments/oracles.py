"""Closed-form solutions and exactly sampled concave fields."""

from __future__ import annotations

import math

import numpy as np

from ..discretization import GridField, GridMask, rasterize
from ..geometry import IntervalDomain, preset, signed_distance


def _mask(domain, grid) -> GridMask:
    return grid if isinstance(grid, GridMask) else rasterize(domain, float(grid))


def torsion_1d_profile(p: float, x) -> np.ndarray:
    """(p-1)/p (1 - |x|^{p/(p-1)}), the p-torsion function of (-1, 1)."""
    x = np.asarray(x, float)
    return (p - 1) / p * (1 - np.abs(x) ** (p / (p - 1)))


def oracle_torsion_1d(p: float, grid) -> GridField:
    """Exact torsion function of (-1, 1) sampled on ``grid`` (a mask or a spacing)."""
    mask = _mask(IntervalDomain(-1.0, 1.0), grid)
    x = mask.coords[..., 0] if mask.coords.ndim > 1 else mask.coords
    vals = np.where(mask.interior, torsion_1d_profile(p, x), 0.0)
    return GridField(mask, np.where(mask.exterior, np.nan, vals))


def oracle_torsion_ball(p: float, N: int = 2, R: float = 1.0):
    """Radial profile r -> u(r) of the p-torsion function of the ball B_R in R^N."""
    e = p / (p - 1)
    c = (p - 1) / p * N ** (-1 / (p - 1))

    def profile(r):
        r = np.asarray(r, float)
        return c * (R ** e - r ** e)

    return profile


def sampled_field(domain, h: float, fn) -> GridField:
    """``fn`` evaluated at every non-exterior node; non-finite values become NaN."""
    mask = rasterize(domain, h)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.asarray(fn(mask.coords), float)
    out = np.where(~mask.exterior & np.isfinite(vals), vals, np.nan)
    return GridField(mask, out)


def calibration_fields(h: float) -> dict:
    """Concave fields known in closed form, sampled exactly at spacing h.

    Nodes where the formula is undefined (log at the boundary, roots of
    negative numbers just outside a disk) carry NaN.
    """
    interval = IntervalDomain(-1.0, 1.0)
    square = preset("square")
    disk = preset("disk")
    ball2 = oracle_torsion_ball(2.0)
    ball3 = oracle_torsion_ball(3.0)

    def x1(pts):
        return pts[..., 0] if pts.ndim > 1 else pts

    fields = {
        "sqrt_torsion_1d_p2": sampled_field(interval, h, lambda x: np.sqrt(torsion_1d_profile(2, x1(x)))),
        "root_torsion_1d_p3": sampled_field(interval, h, lambda x: torsion_1d_profile(3, x1(x)) ** (2 / 3)),
        "sqrt_torsion_disk": sampled_field(
            disk, h, lambda x: np.sqrt(ball2(np.hypot(x[..., 0], x[..., 1])))),
        "root_torsion_disk_p3": sampled_field(
            disk, h, lambda x: ball3(np.hypot(x[..., 0], x[..., 1])) ** (2 / 3)),
        "distance_square": sampled_field(square, h, lambda x: signed_distance(square, x)),
        "distance_disk": sampled_field(disk, h, lambda x: signed_distance(disk, x)),
        "sin_root_square": sampled_field(
            square, h, lambda x: np.sqrt(np.minimum(np.sin(math.pi * x[..., 0]), np.sin(math.pi * x[..., 1])))),
    }
    fields["log_sin_1d"] = sampled_field(IntervalDomain(0.0, 1.0), h,
                                         lambda x: np.log(np.sin(math.pi * x1(x))))
    fields["log_sin_square"] = sampled_field(
        square, h, lambda x: np.log(np.sin(math.pi * x[..., 0]) * np.sin(math.pi * x[..., 1])))
    return fields
