"""Dense discretization of the fractional Laplacian (p = 2) with zero exterior data.

    (-Delta)^s u(x) = int_{R^N} (u(x) - u(y)) / |x - y|^{N + 2s} dy

with kernel constant 1.  On a lattice of spacing h each node owns the cube
of side h around it.  Inside its own cube the integrand is replaced by its
second-order Taylor expansion (the first-order term cancels), which gives a
second-difference correction; every other cube contributes its kernel mass
times (u(x) - u_j); and the u(x) part integrates the kernel exactly over the
complement of the own cube.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg

from .discretization import GridField, GridMask, rasterize


class FractionalError(ValueError):
    pass


def _cell_radius(theta, half):
    return half / np.maximum(np.abs(np.cos(theta)), np.abs(np.sin(theta)))


def tail_integral(s: float, h: float, dim: int) -> float:
    """int over R^N minus the cube [-h/2, h/2]^N of |z|^{-N-2s}."""
    half = h / 2
    if dim == 1:
        return half ** (-2 * s) / s
    val, _ = integrate.quad(lambda t: _cell_radius(t, half) ** (-2 * s), 0, math.pi / 4,
                            epsabs=0, epsrel=1e-13)
    return 8 * val / (2 * s)


def near_moment(s: float, h: float, dim: int) -> float:
    """int over the own cube of z_1^2 |z|^{-N-2s}."""
    half = h / 2
    if dim == 1:
        return 2 * half ** (2 - 2 * s) / (2 - 2 * s)
    # by symmetry z_1^2 averages to |z|^2 / 2
    val, _ = integrate.quad(lambda t: _cell_radius(t, half) ** (2 - 2 * s), 0, math.pi / 4,
                            epsabs=0, epsrel=1e-13)
    return 0.5 * 8 * val / (2 - 2 * s)


_NEAR = 4
_GAUSS = np.polynomial.legendre.leggauss(24)


def cell_weight(offset, s: float, h: float) -> float:
    """int over the cube of side h centred at offset*h of |z|^{-N-2s}."""
    k = np.atleast_1d(np.asarray(offset, float))
    dim = len(k)
    if dim == 1:
        a, b = abs(k[0]) * h - h / 2, abs(k[0]) * h + h / 2
        return (a ** (-2 * s) - b ** (-2 * s)) / (2 * s)
    if np.max(np.abs(k)) > _NEAR:
        return h ** dim * float(np.sum(k * k) * h * h) ** (-(dim + 2 * s) / 2)
    g, w = _GAUSS
    nodes = np.stack(np.meshgrid(k[0] * h + g * h / 2, k[1] * h + g * h / 2, indexing="ij"), -1)
    r2 = np.sum(nodes * nodes, axis=-1)
    return float(np.einsum("i,j,ij->", w, w, r2 ** (-(dim + 2 * s) / 2)) * (h / 2) ** 2)


def fractional_matrix(mask: GridMask, s: float) -> np.ndarray:
    """Symmetric matrix acting on interior unknowns.

    Off-diagonal entries are minus the kernel mass of the neighbouring cube
    (exact in 1D, Gauss-Legendre for nearby cubes in 2D, midpoint rule
    beyond); the diagonal carries the exact tail integral.
    """
    if not 0 < s < 1:
        raise FractionalError("s must lie in (0, 1)")
    h, dim = mask.h, mask.dim
    where = np.argwhere(mask.interior)
    off = where[:, None, :] - where[None, :, :]
    n = len(where)
    if dim == 1:
        kk = np.abs(off[..., 0]).astype(float)
        np.fill_diagonal(kk, 1.0)
        A = -(np.maximum(kk - 0.5, 0.5) ** (-2 * s) - (kk + 0.5) ** (-2 * s)) / (2 * s) * h ** (-2 * s)
    else:
        r2 = np.sum(off * off, axis=-1).astype(float)
        np.fill_diagonal(r2, 1.0)
        A = -(h ** dim) * (r2 * h * h) ** (-(dim + 2 * s) / 2)
        near = np.argwhere(np.max(np.abs(off), axis=-1) <= _NEAR)
        cache = {}
        for i, j in near:
            if i == j:
                continue
            key = tuple(sorted(np.abs(off[i, j])))
            if key not in cache:
                cache[key] = cell_weight(key, s, h)
            A[i, j] = -cache[key]
    np.fill_diagonal(A, tail_integral(s, h, dim))
    # near field: -1/2 sum_d u_dd * M with u_dd from the 3-point stencil
    c = 0.5 * near_moment(s, h, dim) / h ** 2
    idx = mask.interior_index.reshape(mask.shape)
    diag = np.arange(n)
    for d in range(dim):
        A[diag, diag] += 2 * c
        for step in (-1, 1):
            nb = where.copy()
            nb[:, d] += step
            ok = (nb[:, d] >= 0) & (nb[:, d] < mask.shape[d])
            rows = np.flatnonzero(ok)
            cols = idx[tuple(nb[ok].T)]
            inner = cols >= 0
            A[rows[inner], cols[inner]] -= c
    return A


@dataclass
class FractionalEigen:
    s: float
    lam: float
    u: GridField
    info: dict = field(default_factory=dict)


def fractional_eigen(domain, h: float, s: float) -> FractionalEigen:
    """First eigenpair, positive and normalized so that sum u^2 h^N = 1."""
    mask = rasterize(domain, h)
    A = fractional_matrix(mask, s)
    w, V = linalg.eigh(A, subset_by_index=[0, 0])
    x = V[:, 0]
    if x.sum() < 0:
        x = -x
    x = x / math.sqrt(np.sum(x * x) * mask.cell_measure)
    if np.any(x <= 0):
        raise FractionalError("first eigenvector is not positive")
    return FractionalEigen(s, float(w[0]), GridField.from_interior(mask, x),
                           {"n": int(mask.n_interior)})
