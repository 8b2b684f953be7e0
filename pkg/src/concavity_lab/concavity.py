"""Sampled concavity functionals on grid fields.

The basic quantity is

    C_v(x, y, lam) = lam v(x) + (1 - lam) v(y) - v(lam x + (1 - lam) y)

with x, y lattice nodes.  By default only triples whose intermediate point
is itself a node are scanned, so no interpolation error enters; the
``bilinear`` mode interpolates instead.  Scans over unordered node pairs are
vectorized in chunks and the reported witness is the first maximum in
(x-index, y-index, lambda) order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .discretization import GridField, _interp, bilinear_eval

# tau(h) = KAPPA_TOL * h.  Twice the largest defect over exactly sampled concave
# oracles is at rounding level (about 6e-14), so the value is the rounding floor
# of experiments.calibrate_kappa
KAPPA_TOL = 1e-9
MAX_PAIRS = 4_000_000
# budget of node-midpoint triples; about half of all pairs qualify at L = 16
MAX_LATTICE_TRIPLES = 40_000_000
_CHUNK = 2_000_000


class ConcavityError(ValueError):
    pass


def tau(h: float) -> float:
    """Numerical concavity threshold at spacing h."""
    return KAPPA_TOL * h


@dataclass
class ConcavityReport:
    functional: str
    sup_defect: float
    argmax: dict | None
    skipped: int
    total: int
    h: float
    L: int
    tau: float
    info: dict = field(default_factory=dict)

    @property
    def passes(self) -> bool:
        return self.sup_defect <= self.tau

    @property
    def skipped_fraction(self) -> float:
        return self.skipped / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {"functional": self.functional, "sup_defect": self.sup_defect,
                "argmax": self.argmax, "skipped": self.skipped, "total": self.total,
                "h": self.h, "L": self.L, "tau": self.tau, **({"info": self.info} if self.info else {})}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def lambda_grid(L: int) -> np.ndarray:
    """Interior weights k/L together with 1/2, increasing."""
    if L < 2:
        raise ConcavityError("lambda grid needs L >= 2")
    lams = {k / L for k in range(1, L)} | {0.5}
    return np.array(sorted(lams))


def default_stride(n_nodes_per_axis: int, dim: int, max_pairs: int = MAX_PAIRS) -> int:
    s = 1
    while True:
        m = math.ceil(n_nodes_per_axis / s) ** dim
        if m * (m - 1) // 2 <= max_pairs:
            return s
        s += 1


def _select(v: GridField, stride: int | None, region, midpoints: str = "lattice",
            n_lams: int = 16) -> tuple[np.ndarray, int]:
    """Lattice indices (n, dim) of valid nodes on the strided sublattice."""
    mask = v.mask
    ok = v.valid.copy()
    if region is not None:
        ok &= np.asarray(region, bool)
    if stride is None:
        count = int(ok.sum())
        if midpoints == "lattice":
            # fraction of pairs with a node midpoint, summed over the lambda grid
            share = 0.5 if n_lams > 1 else 0.25
            stride = 1
            while count > 1 and (count / stride ** mask.dim) ** 2 / 2 * share > MAX_LATTICE_TRIPLES:
                stride += 1
        else:
            span = max(int(np.ptp(np.nonzero(ok)[d])) + 1 for d in range(mask.dim)) if ok.any() else 1
            stride = default_stride(span, mask.dim)
    sub = np.zeros(mask.shape, bool)
    sub[tuple(slice(None, None, stride) for _ in range(mask.dim))] = True
    idx = np.argwhere(ok & sub)
    return idx, stride


def _values_at(v: GridField, idx: np.ndarray) -> np.ndarray:
    return v.values[tuple(idx.T)]


def _interp_index(v: GridField, z: np.ndarray) -> np.ndarray:
    """Interpolate at fractional lattice coordinates z (..., dim)."""
    mask = v.mask
    ids, fr = [], []
    for d in range(mask.dim):
        zi = z[..., d]
        i = np.clip(np.floor(zi).astype(np.int64), 0, mask.shape[d] - 2)
        ids.append(i)
        fr.append(zi - i)
    return _interp(v.values, v.valid, ids, fr)


def _point(mask, index) -> list:
    return [float(ax[i]) for ax, i in zip(mask.axes, index)]


def _point_frac(mask, z) -> list:
    out = []
    for d, zi in enumerate(np.atleast_1d(z)):
        if mask.index0 is not None:
            out.append(float((mask.index0[d] + zi) * mask.h))
        else:
            out.append(float(mask.origin[d] + zi * mask.h))
    return out


def _pair_scan(v: GridField, idx: np.ndarray, lams: np.ndarray, combine: str = "linear",
               min_dist: float = 0.0, pair_filter=None):
    """Max over pairs i<j and lams of the chosen functional.

    Returns (best, (i, j, k), skipped, total).
    """
    vals = _values_at(v, idx)
    pts = idx.astype(float)
    n = len(idx)
    best, where = -np.inf, None
    skipped = total = 0
    L = len(lams)
    min_d2 = (min_dist / v.mask.h) ** 2
    rows_per_chunk = max(1, _CHUNK // max(1, n * L))
    i = 0
    while i < n - 1:
        i_end = min(n - 1, i + rows_per_chunk)
        ii, jj = [], []
        for a in range(i, i_end):
            ii.append(np.full(n - a - 1, a))
            jj.append(np.arange(a + 1, n))
        ii = np.concatenate(ii)
        jj = np.concatenate(jj)
        if min_d2 > 0:
            d2 = np.sum((pts[ii] - pts[jj]) ** 2, axis=1)
            keep = d2 >= min_d2 - 1e-9
            ii, jj = ii[keep], jj[keep]
        i = i_end
        if pair_filter is not None and ii.size:
            keep = np.asarray(pair_filter(idx[ii], idx[jj]), bool)
            skipped += int((~keep).sum()) * L
            total += int((~keep).sum()) * L
            ii, jj = ii[keep], jj[keep]
        if ii.size == 0:
            continue
        lam = lams[None, :, None]
        z = lam * pts[ii][:, None, :] + (1 - lam) * pts[jj][:, None, :]
        mid = _interp_index(v, z)
        va, vb = vals[ii][:, None], vals[jj][:, None]
        if combine == "linear":
            c = lams[None, :] * va + (1 - lams[None, :]) * vb - mid
        elif combine == "min":
            c = np.minimum(va, vb) - mid
        else:
            raise ConcavityError(combine)
        bad = np.isnan(c)
        total += c.size
        skipped += int(bad.sum())
        if bad.all():
            continue
        c = np.where(bad, -np.inf, c)
        k = int(np.argmax(c))
        if c.flat[k] > best:
            best = float(c.flat[k])
            where = (int(ii[k // L]), int(jj[k // L]), k % L)
    return best, where, skipped, total


def _lattice_scan(v: GridField, idx: np.ndarray, lams: np.ndarray, combine: str = "linear",
                  min_dist: float = 0.0, pair_filter=None):
    """Like :func:`_pair_scan` but only triples whose intermediate point is a node.

    For lam = k/m in lowest terms the point lam x + (1 - lam) y is a lattice
    node exactly when x - y is divisible by m, so pairs are enumerated within
    residue classes mod m.  No interpolation enters.
    """
    full = np.where(v.valid, v.values, np.nan)
    vals = _values_at(v, idx)
    best, where = -np.inf, None
    skipped = total = 0
    min_d2 = (min_dist / v.mask.h) ** 2
    for k, lam in enumerate(lams):
        frac = Fraction(float(lam)).limit_denominator(1 << 20)
        m, num = frac.denominator, frac.numerator
        key = np.ravel_multi_index(tuple((idx % m).T), (m,) * idx.shape[1])
        for r in np.unique(key):
            grp = np.flatnonzero(key == r)
            if len(grp) < 2:
                continue
            ii, jj = np.triu_indices(len(grp), k=1)
            step = _CHUNK
            for s in range(0, len(ii), step):
                a, b = grp[ii[s:s + step]], grp[jj[s:s + step]]
                if min_d2 > 0:
                    keep = np.sum((idx[a] - idx[b]) ** 2, axis=1) >= min_d2 - 1e-9
                    a, b = a[keep], b[keep]
                    if a.size == 0:
                        continue
                if pair_filter is not None:
                    keep = np.asarray(pair_filter(idx[a], idx[b]), bool)
                    skipped += int((~keep).sum())
                    total += int((~keep).sum())
                    a, b = a[keep], b[keep]
                    if a.size == 0:
                        continue
                z = idx[b] + ((idx[a] - idx[b]) // m) * num
                mid = full[tuple(z.T)]
                if combine == "linear":
                    c = lam * vals[a] + (1 - lam) * vals[b] - mid
                else:
                    c = np.minimum(vals[a], vals[b]) - mid
                bad = np.isnan(c)
                total += c.size
                skipped += int(bad.sum())
                if bad.all():
                    continue
                c = np.where(bad, -np.inf, c)
                top = c.max()
                if top < best:
                    continue
                # lexicographic tie-break over (x, y, lambda)
                cand = np.flatnonzero(c == top)
                t = min((int(a[q]), int(b[q])) for q in cand)
                tup = (t[0], t[1], k)
                if top > best or tup < where:
                    best, where = float(top), tup
    return best, where, skipped, total


def _scan_report(v: GridField, functional: str, lams, stride, region, combine="linear",
                 min_dist=0.0, L=None, midpoints: str = "lattice", pair_filter=None) -> ConcavityReport:
    idx, stride = _select(v, stride, region, midpoints, len(lams))
    if len(idx) < 2:
        raise ConcavityError("fewer than two valid nodes")
    if midpoints == "lattice":
        best, where, skipped, total = _lattice_scan(v, idx, lams, combine, min_dist, pair_filter)
    elif midpoints == "bilinear":
        best, where, skipped, total = _pair_scan(v, idx, lams, combine, min_dist, pair_filter)
    else:
        raise ConcavityError(f"unknown midpoint mode {midpoints!r}")
    if where is None:
        raise ConcavityError("every triple was skipped")
    a, b, k = where
    lam = float(lams[k])
    mask = v.mask
    argmax = {"x": _point(mask, idx[a]), "y": _point(mask, idx[b]), "lambda": lam}
    return ConcavityReport(functional, best, argmax, skipped, total, mask.h,
                           L if L is not None else len(lams), tau(mask.h),
                           {"stride": stride, "midpoints": midpoints})


def concavity_defect(v: GridField, stride: int | None = None, L: int = 16,
                     region=None, midpoints: str = "lattice", pair_filter=None) -> ConcavityReport:
    """Sup of C_v over strided node pairs and lambda in {k/L} with 1/2.

    The endpoints lambda = 0, 1 (where C_v vanishes) are not scanned, so a
    strictly concave field reports a negative value.  ``region`` optionally
    restricts the nodes; ``pair_filter(ia, ib)`` receives lattice indices of
    candidate pairs and returns which to keep (dropped pairs count as skipped).
    """
    return _scan_report(v, "C", lambda_grid(L), stride, region, L=L, midpoints=midpoints,
                        pair_filter=pair_filter)


def mid_concavity_defect(v: GridField, stride: int | None = None, region=None,
                         midpoints: str = "lattice", pair_filter=None) -> ConcavityReport:
    """Concavity function at lambda = 1/2 only."""
    return _scan_report(v, "C_mid", np.array([0.5]), stride, region, L=1, midpoints=midpoints,
                        pair_filter=pair_filter)


def segment_filter(u: GridField, threshold: float, samples: int = 32):
    """Pair filter keeping segments [x, y] along which u > threshold.

    Membership is tested at ``samples`` equispaced points (endpoints
    included) with bilinear interpolation of u.
    """
    ts = np.linspace(0.0, 1.0, samples)

    def keep(ia, ib):
        za = ia.astype(float)
        zb = ib.astype(float)
        out = np.ones(len(ia), bool)
        for t in ts:
            vals = _interp_index(u, (1 - t) * za + t * zb)
            out &= np.nan_to_num(vals, nan=-np.inf) > threshold
        return out

    return keep


def recompute_defect(v: GridField, argmax: dict) -> float:
    """C_v at a witness, interpolating in physical coordinates."""
    x = np.asarray(argmax["x"], float)
    y = np.asarray(argmax["y"], float)
    lam = float(argmax["lambda"])
    vx = bilinear_eval(v, x if x.size > 1 else x[0])
    vy = bilinear_eval(v, y if y.size > 1 else y[0])
    z = lam * x + (1 - lam) * y
    return lam * vx + (1 - lam) * vy - bilinear_eval(v, z if z.size > 1 else z[0])


def quasiconcavity_defect(u: GridField, levels: int = 20, region=None,
                          stride: int | None = None) -> ConcavityReport:
    """Largest relative excess of the lattice hull of a superlevel set.

    For each of ``levels`` equispaced thresholds t the node set S = {u >= t}
    is compared with the lattice nodes inside conv(S); a lattice-convex set
    gives 0.  The direct scan of min(u(x), u(y)) - u(z) over a subsample is
    stored in ``info['min_form']``.
    """
    mask = u.mask
    ok = u.valid.copy()
    if region is not None:
        ok &= np.asarray(region, bool)
    vals = np.where(ok, u.values, np.nan)
    lo, hi = float(np.nanmin(vals)), float(np.nanmax(vals))
    pts = np.argwhere(ok)
    all_idx = np.argwhere(np.ones(mask.shape, bool))
    worst, worst_level, used = 0.0, None, 0
    for k in range(1, levels + 1):
        t = lo + (hi - lo) * k / (levels + 1)
        sel = pts[vals[tuple(pts.T)] >= t]
        if len(sel) == 0:
            continue
        used += 1
        if mask.dim == 1:
            span = int(sel[:, 0].max() - sel[:, 0].min() + 1)
            ratio = (span - len(sel)) / len(sel)
        else:
            inside = _lattice_in_hull(sel, all_idx)
            ratio = (int(inside.sum()) - len(sel)) / len(sel)
        if ratio > worst:
            worst, worst_level = ratio, t
    if used == 0:
        raise ConcavityError("every level set was empty")
    info = {"levels_used": used, "worst_level": worst_level}
    try:
        mf = _scan_report(u, "quasi", np.array([0.25, 0.5, 0.75]),
                          stride if stride is not None else None, region, combine="min", L=4)
        info["min_form"] = mf.sup_defect
        info["min_form_argmax"] = mf.argmax
    except ConcavityError:
        info["min_form"] = None
    return ConcavityReport("quasi", worst, None, 0, used, mask.h, levels, tau(mask.h), info)


def _lattice_in_hull(sel: np.ndarray, cand: np.ndarray) -> np.ndarray:
    """Candidates lying in the convex hull of the integer points ``sel``."""
    lo, hi = sel.min(axis=0), sel.max(axis=0)
    box = np.all((cand >= lo) & (cand <= hi), axis=1)
    out = np.zeros(len(cand), bool)
    if np.any(hi - lo == 0):
        # degenerate hull: a lattice segment, every node of the box lies on it
        out[box] = True
        return out
    try:
        hull = ConvexHull(sel.astype(float))
    except QhullError:
        out[box] = True
        return out
    eq = hull.equations
    c = cand[box].astype(float)
    out[box] = np.all(c @ eq[:, :-1].T + eq[:, -1] <= 1e-9, axis=1)
    return out


def eps_uniform_modulus(v: GridField, eps: float, stride: int | None = None, region=None,
                        quasi: bool = False, midpoints: str = "lattice") -> float:
    """rho = -sup C_v(x, y, 1/2) over pairs with |x - y| >= eps.

    With ``quasi`` the min-form min(v(x), v(y)) - v((x+y)/2) replaces C_v.
    """
    if not eps > 2 * v.mask.h:
        raise ConcavityError("eps must exceed 2h")
    try:
        rep = _scan_report(v, "eps_uniform", np.array([0.5]), stride, region,
                           combine="min" if quasi else "linear", min_dist=eps, L=1,
                           midpoints=midpoints)
    except ConcavityError as exc:
        raise ConcavityError(f"no admissible pairs at eps={eps}") from exc
    return -rep.sup_defect


def harmonic_concavity_defect(hfun, box, n: int = 12,
                              lams=(0.25, 0.5, 0.75)) -> ConcavityReport:
    """Sampled sup of HC_h over a lattice on a box.

    ``hfun`` maps points of shape (..., d) to values; ``box`` is a list of d
    intervals.  Pairs run over the n**d lattice points and the midpoint value
    is an exact evaluation of ``hfun``.
    """
    axes = [np.linspace(a, b, n) for a, b in box]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))
    hv = np.asarray(hfun(grid), float).reshape(-1)
    if np.any(~(hv > 0)):
        raise ConcavityError("harmonic concavity needs a positive function")
    lams = np.asarray(lams, float)
    m = len(grid)
    ii, jj = np.triu_indices(m, k=1)
    best, where = -np.inf, None
    step = max(1, _CHUNK // len(lams))
    for s in range(0, len(ii), step):
        a, b = ii[s:s + step], jj[s:s + step]
        lam = lams[None, :]
        ha, hb = hv[a][:, None], hv[b][:, None]
        z = lam[..., None] * grid[a][:, None, :] + (1 - lam[..., None]) * grid[b][:, None, :]
        hz = np.asarray(hfun(z), float)
        c = ha * hb / (lam * hb + (1 - lam) * ha) - hz
        k = int(np.argmax(c))
        if c.flat[k] > best:
            best = float(c.flat[k])
            p = k // len(lams)
            where = {"x": grid[a[p]].tolist(), "y": grid[b[p]].tolist(),
                     "lambda": float(lams[k % len(lams)])}
    return ConcavityReport("HC", best, where, 0, len(ii) * len(lams), float("nan"),
                           len(lams), 1e-9, {"n": n})


@dataclass
class HessianReport:
    max_eig: np.ndarray
    min_eig: np.ndarray
    sup_max_eig: float
    argmax: list | None
    nodes: int

    @property
    def strongly_concave(self) -> bool:
        return self.sup_max_eig < 0


def hessian_min_eig(v: GridField, region=None) -> HessianReport:
    """Second-difference Hessian eigenvalues at nodes with a valid 3x3 patch.

    Off-patch nodes hold NaN.  ``sup_max_eig`` is the largest upper
    eigenvalue; the field is strongly concave when it is negative.
    """
    mask = v.mask
    h = mask.h
    vals = np.where(v.valid, v.values, np.nan)
    ok = v.valid.copy()
    if region is not None:
        ok &= np.asarray(region, bool)
    if mask.dim == 1:
        d2 = np.full(mask.shape, np.nan)
        d2[1:-1] = (vals[2:] - 2 * vals[1:-1] + vals[:-2]) / h ** 2
        d2[~ok] = np.nan
        lo = hi = d2
    else:
        c = vals[1:-1, 1:-1]
        dxx = (vals[2:, 1:-1] - 2 * c + vals[:-2, 1:-1]) / h ** 2
        dyy = (vals[1:-1, 2:] - 2 * c + vals[1:-1, :-2]) / h ** 2
        dxy = (vals[2:, 2:] - vals[2:, :-2] - vals[:-2, 2:] + vals[:-2, :-2]) / (4 * h ** 2)
        mean = 0.5 * (dxx + dyy)
        rad = np.sqrt((0.5 * (dxx - dyy)) ** 2 + dxy ** 2)
        hi = np.full(mask.shape, np.nan)
        lo = np.full(mask.shape, np.nan)
        hi[1:-1, 1:-1] = mean + rad
        lo[1:-1, 1:-1] = mean - rad
        hi[~ok] = np.nan
        lo[~ok] = np.nan
    count = int(np.isfinite(hi).sum())
    if count == 0:
        raise ConcavityError("too few interior nodes for second differences")
    k = int(np.nanargmax(hi))
    idx = np.unravel_index(k, mask.shape)
    return HessianReport(hi, lo, float(hi[idx]), _point(mask, idx), count)
