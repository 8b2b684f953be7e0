"""Uniform masked grids, off-lattice interpolation and the discrete energy.

Nodes are classified by the signed distance ``sd`` of the domain:
interior when ``sd > h/2``, dirichlet when ``|sd| <= h/2`` and exterior
otherwise.  Unknowns live on interior nodes; every other node carries zero.

The gradient energy is assembled per cell.  Each cell corner contributes the
gradient built from its two incident cell edges (forward or backward
differences), weighted by a quarter of the cell area.  For ``p = 2`` the
quadratic form is exactly the 5-point Laplacian.
"""

from __future__ import annotations

import csv
import math
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .geometry import IntervalDomain, signed_distance

EXTERIOR, DIRICHLET, INTERIOR = 0, 1, 2
CLASS_NAMES = {EXTERIOR: "exterior", DIRICHLET: "dirichlet", INTERIOR: "interior"}
CLASS_CODES = {v: k for k, v in CLASS_NAMES.items()}


class GridError(ValueError):
    pass


class OutOfDomainError(ValueError):
    """Raised when an interpolation cell touches an exterior or invalid node."""


class GridMask:
    """Uniform lattice ``origin + index*h`` with a node classification."""

    def __init__(self, origin, h: float, node_class: np.ndarray, index0=None):
        self.h = float(h)
        self.node_class = np.asarray(node_class, dtype=np.int8)
        self.node_class.setflags(write=False)
        self.origin = tuple(float(o) for o in np.atleast_1d(origin))
        # integer lattice offset, used to build exact coordinates (index0 + i)*h
        self.index0 = None if index0 is None else tuple(int(i) for i in np.atleast_1d(index0))
        if len(self.origin) != self.node_class.ndim:
            raise GridError("origin dimension does not match node array")

    @property
    def dim(self) -> int:
        return self.node_class.ndim

    @property
    def shape(self) -> tuple:
        return self.node_class.shape

    @property
    def cell_measure(self) -> float:
        return self.h ** self.dim

    @cached_property
    def axes(self) -> list[np.ndarray]:
        out = []
        for d, n in enumerate(self.shape):
            idx = np.arange(n)
            if self.index0 is not None:
                out.append((self.index0[d] + idx) * self.h)
            else:
                out.append(self.origin[d] + idx * self.h)
        return out

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``shape`` (1D) or ``shape + (2,)`` (2D)."""
        if self.dim == 1:
            return self.axes[0]
        gx, gy = np.meshgrid(self.axes[0], self.axes[1], indexing="ij")
        return np.stack([gx, gy], axis=-1)

    @cached_property
    def interior(self) -> np.ndarray:
        return self.node_class == INTERIOR

    @cached_property
    def dirichlet(self) -> np.ndarray:
        return self.node_class == DIRICHLET

    @cached_property
    def exterior(self) -> np.ndarray:
        return self.node_class == EXTERIOR

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    @cached_property
    def interior_points(self) -> np.ndarray:
        return self.coords[self.interior]

    @cached_property
    def interior_index(self) -> np.ndarray:
        """Flat node index -> unknown index, or -1 for non-interior nodes."""
        idx = np.full(self.node_class.size, -1, dtype=np.int64)
        flat = np.flatnonzero(self.interior.ravel())
        idx[flat] = np.arange(flat.size)
        return idx

    @cached_property
    def stencil(self) -> "_Stencil":
        return _Stencil(self)

    def __eq__(self, other):
        return (isinstance(other, GridMask) and self.h == other.h
                and self.origin == other.origin
                and np.array_equal(self.node_class, other.node_class))

    def __hash__(self):
        return hash((self.h, self.origin, self.shape))


class _Stencil:
    """Gradient terms of the cell energy as flat index arrays.

    Term ``k`` uses ``gx = (v[xb]-v[xa])/h``, ``gy = (v[yb]-v[ya])/h`` and the
    regularization kernel evaluated at node ``kn``; its quadrature weight is
    ``weight``.  In 1D ``ya == yb`` so ``gy`` vanishes.
    """

    def __init__(self, mask: GridMask):
        h = mask.h
        nc = mask.node_class
        if mask.dim == 1:
            n = nc.size
            i0 = np.arange(n - 1)
            active = (nc[:-1] == INTERIOR) | (nc[1:] == INTERIOR)
            c0, c1 = i0[active], i0[active] + 1
            self.xa = np.concatenate([c0, c0])
            self.xb = np.concatenate([c1, c1])
            self.ya = self.xa
            self.yb = self.xa
            self.kn = np.concatenate([c0, c1])
            self.weight = h / 2
        else:
            nx, ny = nc.shape
            flat = np.arange(nc.size).reshape(nc.shape)
            c00, c10 = flat[:-1, :-1], flat[1:, :-1]
            c01, c11 = flat[:-1, 1:], flat[1:, 1:]
            inter = nc == INTERIOR
            active = inter[:-1, :-1] | inter[1:, :-1] | inter[:-1, 1:] | inter[1:, 1:]
            c00, c10, c01, c11 = (c[active] for c in (c00, c10, c01, c11))
            self.xa = np.concatenate([c00, c00, c01, c01])
            self.xb = np.concatenate([c10, c10, c11, c11])
            self.ya = np.concatenate([c00, c10, c00, c10])
            self.yb = np.concatenate([c01, c11, c01, c11])
            self.kn = np.concatenate([c00, c10, c01, c11])
            self.weight = h * h / 4
        self.h = h
        self.size = nc.size


class GridField:
    """Node values on a :class:`GridMask`.

    Solutions carry exact zeros off the interior.  Transformed fields may hold
    NaN at nodes where the transform is undefined; such nodes are invalid.
    """

    def __init__(self, mask: GridMask, values):
        values = np.array(values, dtype=float)
        if values.shape != mask.shape:
            raise GridError(f"values shape {values.shape} != grid shape {mask.shape}")
        self.mask = mask
        self.values = values

    @classmethod
    def from_interior(cls, mask: GridMask, x: np.ndarray) -> "GridField":
        vals = np.zeros(mask.shape)
        vals[mask.interior] = x
        return cls(mask, vals)

    @classmethod
    def from_function(cls, mask: GridMask, fn, where: str = "interior") -> "GridField":
        """Sample ``fn(points)`` on interior nodes (default) or all non-exterior nodes."""
        sel = mask.interior if where == "interior" else ~mask.exterior
        vals = np.zeros(mask.shape)
        vals[sel] = fn(mask.coords[sel])
        return cls(mask, vals)

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.mask.interior]

    @property
    def valid(self) -> np.ndarray:
        return ~self.mask.exterior & np.isfinite(self.values)

    def with_values(self, values) -> "GridField":
        return GridField(self.mask, values)

    def max(self) -> float:
        return float(np.nanmax(self.values[~self.mask.exterior]))

    def min_interior(self) -> float:
        return float(self.interior_values.min())


def rasterize(domain, h: float) -> GridMask:
    """Classify lattice nodes ``k*h`` covering the domain."""
    if h <= 0:
        raise GridError("grid spacing must be positive")
    if isinstance(domain, IntervalDomain):
        lo, hi = np.array([domain.a]), np.array([domain.b])
    else:
        lo, hi = domain.bounds()
    i0 = np.floor(np.asarray(lo) / h).astype(int) - 1
    i1 = np.ceil(np.asarray(hi) / h).astype(int) + 1
    shape = tuple(int(n) for n in i1 - i0 + 1)
    axes = [(i0[d] + np.arange(shape[d])) * h for d in range(len(shape))]
    if isinstance(domain, IntervalDomain):
        sd = signed_distance(domain, axes[0])
    else:
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        sd = signed_distance(domain, np.stack([gx, gy], axis=-1))
    cls = np.full(shape, EXTERIOR, dtype=np.int8)
    cls[np.abs(sd) <= h / 2] = DIRICHLET
    cls[sd > h / 2] = INTERIOR
    n_int = int((cls == INTERIOR).sum())
    min_nodes = 9 if len(shape) == 2 else 3
    if n_int < min_nodes:
        raise GridError(f"grid too coarse: {n_int} interior nodes (need at least {min_nodes})")
    return GridMask(i0 * h, h, cls, index0=i0)


def restrict_mask(mask: GridMask, domain) -> np.ndarray:
    """Boolean node selection of ``mask`` lying strictly inside ``domain``."""
    sd = signed_distance(domain, mask.coords)
    return (sd > 0) & ~mask.exterior


def _cell_lookup(mask: GridMask, points: np.ndarray):
    pts = np.asarray(points, dtype=float)
    if mask.dim == 1:
        # 1D points are plain coordinates
        pts = pts[..., None]
    rel = [(pts[..., d] - mask.axes[d][0]) / mask.h for d in range(mask.dim)]
    idx, frac, inside = [], [], np.ones(rel[0].shape, dtype=bool)
    for d in range(mask.dim):
        n = mask.shape[d]
        i = np.floor(rel[d]).astype(np.int64)
        inside &= (rel[d] >= 0) & (rel[d] <= n - 1)
        i = np.clip(i, 0, n - 2)
        idx.append(i)
        frac.append(rel[d] - i)
    return idx, frac, inside


def bilinear_values(field: GridField, points) -> np.ndarray:
    """Vectorized interpolation; NaN where the cell touches an invalid node.

    Corners with zero weight are ignored, so a point lying on a cell edge only
    needs the nodes of that edge.
    """
    mask = field.mask
    idx, frac, inside = _cell_lookup(mask, points)
    return np.where(inside, _interp(field.values, field.valid, idx, frac), np.nan)


def _interp(values, valid, idx, frac):
    """Multilinear interpolation from lower-corner indices and fractions."""
    vals = np.where(valid, values, np.nan)
    out = np.zeros(np.shape(frac[0]))
    bad = np.zeros(out.shape, dtype=bool)
    dim = len(idx)
    for corner in range(2 ** dim):
        w = np.ones(out.shape)
        ix = []
        for d in range(dim):
            up = (corner >> d) & 1
            w = w * (frac[d] if up else 1 - frac[d])
            ix.append(idx[d] + up)
        v = vals[tuple(ix)]
        use = w > 0
        bad |= use & np.isnan(v)
        out += np.where(use, w * np.where(use, v, 0.0), 0.0)
    out[bad] = np.nan
    return out


def bilinear_eval(field: GridField, point) -> float:
    """Interpolated value at one point; raises if the cell is not usable."""
    val = float(bilinear_values(field, np.asarray(point, dtype=float)[None, ...])[0])
    if math.isnan(val):
        raise OutOfDomainError(f"cell of {point} touches an exterior or invalid node")
    return val


class EnergyFunctional:
    """Discrete energy of a problem restricted to interior unknowns.

    ``spec`` must provide ``p``, ``epsilon_reg``, ``paper_epsilon``, an optional
    ``kernel`` (object with ``K`` and ``dK``) and ``source_terms(mask)``
    returning an object with vectorized ``F``, ``f`` and ``df`` acting on the
    interior vector.
    """

    def __init__(self, spec, mask: GridMask, epsilon_reg: float | None = None):
        self.spec = spec
        self.mask = mask
        self.p = float(spec.p)
        self.eps_reg = float(spec.epsilon_reg if epsilon_reg is None else epsilon_reg)
        self.eps_paper = float(getattr(spec, "paper_epsilon", 0.0) or 0.0)
        self.kernel = getattr(spec, "kernel", None) if self.eps_paper > 0 else None
        self.source = spec.source_terms(mask)
        self.st = mask.stencil
        self.flat_interior = np.flatnonzero(mask.interior.ravel())
        self.n = self.flat_interior.size
        self.dv = mask.cell_measure

    def full(self, x: np.ndarray) -> np.ndarray:
        v = np.zeros(self.st.size)
        v[self.flat_interior] = x
        return v

    def _terms(self, v):
        st = self.st
        gx = (v[st.xb] - v[st.xa]) / st.h
        gy = (v[st.yb] - v[st.ya]) / st.h
        e = np.full(gx.shape, self.eps_reg ** 2)
        if self.kernel is not None:
            kv = np.abs(v[st.kn])
            e = e + self.eps_paper * self.kernel.K(kv) ** (2.0 / self.p)
        return gx, gy, e

    def value(self, x: np.ndarray) -> float:
        v = self.full(x)
        gx, gy, e = self._terms(v)
        r = e + gx * gx + gy * gy
        grad_part = self.st.weight / self.p * float(np.sum(r ** (self.p / 2)))
        return grad_part - self.dv * float(np.sum(self.source.F(x)))

    def gradient_energy(self, x: np.ndarray) -> float:
        """The gradient part ``(1/p) sum |grad v|^p`` alone."""
        v = self.full(x)
        gx, gy, e = self._terms(v)
        return self.st.weight / self.p * float(np.sum((e + gx * gx + gy * gy) ** (self.p / 2)))

    def _flux(self, r):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(r > 0, r ** (self.p / 2 - 1), 0.0)
        return a

    def gradient(self, x: np.ndarray) -> np.ndarray:
        st = self.st
        v = self.full(x)
        gx, gy, e = self._terms(v)
        r = e + gx * gx + gy * gy
        a = st.weight * self._flux(r)
        fx, fy = a * gx / st.h, a * gy / st.h
        n = st.size
        g = (np.bincount(st.xb, fx, n) - np.bincount(st.xa, fx, n)
             + np.bincount(st.yb, fy, n) - np.bincount(st.ya, fy, n))
        if self.kernel is not None:
            kv = v[st.kn]
            sign = np.where(kv < 0, -1.0, 1.0)
            kval = self.kernel.K(np.abs(kv))
            with np.errstate(divide="ignore", invalid="ignore"):
                de = self.eps_paper * (2.0 / self.p) * np.where(
                    kval > 0, kval ** (2.0 / self.p - 1), 0.0) * self.kernel.dK(np.abs(kv)) * sign
            g += np.bincount(st.kn, 0.5 * a * de, n)
        return g[self.flat_interior] - self.dv * self.source.f(x)

    def value_and_gradient(self, x):
        return self.value(x), self.gradient(x)

    def hessian(self, x: np.ndarray, source_mode: str = "full") -> sp.csr_matrix:
        """Sparse Hessian of the gradient part plus the source curvature.

        The dependence of the K-regularization on ``v`` is left out, so the
        matrix is exact only when that term is off.  ``source_mode='convex'``
        keeps only the nonnegative part of ``-F''`` (a positive definite
        model for descent), ``'full'`` keeps it all.  For ``p < 2`` the
        negative rank-one part of the integrand curvature is dropped, which
        gives a majorant; the exact second derivative is unbounded where the
        gradient vanishes and Newton steps would oscillate there.
        """
        st = self.st
        p = self.p
        rank_one = max(p - 2, 0.0)
        v = self.full(x)
        gx, gy, e = self._terms(v)
        r = e + gx * gx + gy * gy
        with np.errstate(divide="ignore", invalid="ignore"):
            # r^(p/2-1) with 0^0 = 1, so flat cells keep their p = 2 weight
            lin = r ** (p / 2 - 1) if p >= 2 else np.where(r > 0, r ** (p / 2 - 1), 0.0)
            base = np.where(r > 0, r ** (p / 2 - 2), 0.0) * rank_one
        w = st.weight / st.h ** 2
        mxx = w * (lin + base * gx * gx)
        myy = w * (lin + base * gy * gy)
        mxy = w * base * gx * gy
        rows, cols, vals = [], [], []
        xs = ((st.xa, -1.0), (st.xb, 1.0))
        ys = ((st.ya, -1.0), (st.yb, 1.0))
        for na, sa in xs:
            for nb, sb in xs:
                rows.append(na); cols.append(nb); vals.append(sa * sb * mxx)
            for nb, sb in ys:
                rows.append(na); cols.append(nb); vals.append(sa * sb * mxy)
                rows.append(nb); cols.append(na); vals.append(sa * sb * mxy)
        for na, sa in ys:
            for nb, sb in ys:
                rows.append(na); cols.append(nb); vals.append(sa * sb * myy)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        imap = self.mask.interior_index
        ri, ci = imap[rows], imap[cols]
        keep = (ri >= 0) & (ci >= 0)
        h = sp.coo_matrix((vals[keep], (ri[keep], ci[keep])), shape=(self.n, self.n)).tocsr()
        curv = -self.dv * self.source.df(x)
        if source_mode == "convex":
            curv = np.maximum(curv, 0.0)
        elif source_mode == "none":
            curv = np.zeros_like(curv)
        return (h + sp.diags(curv)).tocsr()


def discrete_energy(spec, v: GridField, epsilon_reg: float | None = None) -> float:
    """Energy of ``v``; values off the interior are ignored (treated as zero)."""
    fun = EnergyFunctional(spec, v.mask, epsilon_reg)
    return fun.value(v.interior_values)


def discrete_energy_gradient(spec, v: GridField, epsilon_reg: float | None = None) -> GridField:
    """Gradient of :func:`discrete_energy` with respect to interior values."""
    fun = EnergyFunctional(spec, v.mask, epsilon_reg)
    return GridField.from_interior(v.mask, fun.gradient(v.interior_values))


def oscillation(field: GridField) -> float:
    vals = field.values[field.valid]
    if vals.size == 0:
        raise GridError("no valid nodes")
    return float(vals.max() - vals.min())


def write_field_csv(field: GridField, path) -> None:
    mask = field.mask
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "value", "class"])
        coords = mask.coords
        for idx in np.ndindex(mask.shape):
            if mask.dim == 1:
                x, y = coords[idx], ""
            else:
                x, y = coords[idx]
                y = repr(float(y))
            w.writerow([repr(float(x)), y, repr(float(field.values[idx])),
                        CLASS_NAMES[int(mask.node_class[idx])]])


def read_field_csv(path) -> GridField:
    """Inverse of :func:`write_field_csv`."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["x", "y", "value", "class"]:
            raise GridError(f"{path}: expected header x,y,value,class")
        rows = list(reader)
    if not rows:
        raise GridError(f"{path}: no rows")
    xs = np.array([float(r["x"]) for r in rows])
    one_d = rows[0]["y"] == ""
    ux = np.unique(xs)
    h = float(np.min(np.diff(ux)))
    if one_d:
        shape = (ux.size,)
        ix = np.rint((xs - ux[0]) / h).astype(int)
        index = (ix,)
        origin = (ux[0],)
    else:
        ys = np.array([float(r["y"]) for r in rows])
        uy = np.unique(ys)
        shape = (ux.size, uy.size)
        index = (np.rint((xs - ux[0]) / h).astype(int), np.rint((ys - uy[0]) / h).astype(int))
        origin = (ux[0], uy[0])
    cls = np.zeros(shape, dtype=np.int8)
    vals = np.zeros(shape)
    cls[index] = [CLASS_CODES[r["class"]] for r in rows]
    vals[index] = [float(r["value"]) for r in rows]
    i0 = np.rint(np.array(origin) / h).astype(int)
    exact = np.allclose(i0 * h, origin, rtol=0, atol=1e-12)
    return GridField(GridMask(origin, h, cls, index0=i0 if exact else None), vals)
