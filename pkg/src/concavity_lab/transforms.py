"""Transformations applied to solutions and the transformed source B.

A transform ``phi`` is applied nodewise to a positive solution ``u``; its
inverse ``psi`` is used to write the equation satisfied by ``v = phi(u)``.
Kinds:

* ``power``        phi(t) = zeta * t**gamma
* ``log``          phi(t) = log t
* ``shifted_log``  phi(t) = log(t - sigma)
* ``integral_G``   phi(t) = int_1^t G(s)**(-1/p) ds with G' = g, G(0) = 0
* ``singular_phi`` integral_G with g(t) = (t + eta)**q
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .concavity import harmonic_concavity_defect
from .discretization import GridField


class TransformError(ValueError):
    pass


# --------------------------------------------------------------------------
# exponents and constants

def exponent_for(case: str, p: float, q: float, theta: float | None = None,
                 omega: float | None = None) -> float:
    """Concavity exponent for constant, theta-concave or Hardy-Henon weights."""
    if not p > 1:
        raise TransformError("p must exceed 1")
    if q > p - 1 or q < 0:
        raise TransformError(f"exponent needs 0 <= q <= p-1, got q={q}, p={p}")
    if case == "constant_weight":
        return (p - 1 - q) / p
    if case == "theta_concave":
        if theta is None or theta < 1:
            raise TransformError("theta_concave needs theta >= 1")
        return theta * (p - 1 - q) / (1 + theta * p)
    if case == "hardy_henon":
        if omega is None or not 0 <= omega <= 1:
            raise TransformError("hardy_henon needs omega in [0, 1]")
        return (p - 1 - q) / (omega + p)
    raise TransformError(f"unknown exponent case {case!r}")


def zeta_constant(p: float, q2: float) -> float:
    """Scale making phi(t) = zeta t^gamma match int_1^t G^{-1/p} for g = t^q2."""
    if not 0 <= q2 < p - 1:
        raise TransformError(f"zeta needs 0 <= q2 < p-1 (q2={q2}, p={p})")
    return ((q2 + 1) / p) ** (1 / p) * p / (p - 1 - q2)


def c_pq(p: float, q: float) -> float:
    """Constant of the perturbed concavity bound."""
    if not 0 <= q < p - 1:
        raise TransformError("C_pq needs 0 <= q < p-1")
    return (q + 1) ** (1 / p) * p ** (1 - 1 / p) / (p - 1 - q)


# --------------------------------------------------------------------------
# g and its primitive

@dataclass(frozen=True)
class GFunction:
    """Source profile g with optional closed-form primitive G (G(0) = 0)."""

    g: Callable
    G: Callable | None = None
    label: str = "custom"

    @classmethod
    def power(cls, q: float) -> "GFunction":
        if q <= -1:
            raise TransformError("power(q) needs q > -1 for G(0) = 0")
        return cls(lambda t: np.asarray(t, float) ** q,
                   lambda t: np.asarray(t, float) ** (q + 1) / (q + 1), f"power({q})")

    @classmethod
    def shifted_power(cls, q: float, eta: float) -> "GFunction":
        if q == -1:
            G = lambda t: np.log1p(np.asarray(t, float) / eta)  # noqa: E731
        else:
            G = lambda t: ((np.asarray(t, float) + eta) ** (q + 1) - eta ** (q + 1)) / (q + 1)  # noqa: E731
        return cls(lambda t: (np.asarray(t, float) + eta) ** q, G, f"shifted_power({q},{eta})")

    def primitive(self, t):
        if self.G is not None:
            return self.G(t)
        t = np.atleast_1d(np.asarray(t, float))
        out = np.empty_like(t)
        order = np.argsort(t)
        acc, prev = 0.0, 0.0
        for k in order:
            val, _ = integrate.quad(self.g, prev, t[k], epsabs=0, epsrel=1e-13, limit=200)
            acc += val
            prev = t[k]
            out[k] = acc
        return out


def g_from_literal(text: str) -> GFunction:
    m = re.fullmatch(r"\s*power\(\s*([-0-9.eE+]+)\s*\)\s*", text)
    if m:
        return GFunction.power(float(m.group(1)))
    m = re.fullmatch(r"\s*shifted_power\(\s*([-0-9.eE+]+)\s*,\s*([0-9.eE+-]+)\s*\)\s*", text)
    if m:
        return GFunction.shifted_power(float(m.group(1)), float(m.group(2)))
    if text.strip() == "exp":
        return GFunction(np.exp, lambda t: np.expm1(np.asarray(t, float)), "exp")
    raise TransformError(f"unknown g literal {text!r}")


def phi_integral(g, p: float, t: float, rtol: float = 1e-8) -> float:
    """int_1^t G(s)^{-1/p} ds by adaptive quadrature.

    ``g`` is a callable or a :class:`GFunction`.  The integrable singularity of
    G^{-1/p} at 0 is handled by the quadrature's endpoint extrapolation.
    """
    gf = g if isinstance(g, GFunction) else GFunction(g)
    t = float(t)
    if t == 1.0:
        return 0.0
    if t < 0:
        raise TransformError("phi is defined for t >= 0")

    def integrand(s):
        G = float(np.atleast_1d(gf.primitive(s))[0])
        if not G > 0:
            raise TransformError(f"nonpositive G({s}) = {G}")
        return G ** (-1.0 / p)

    lo, hi = sorted((t, 1.0))
    val, err = integrate.quad(integrand, lo, hi, epsabs=0, epsrel=rtol * 1e-2, limit=400)
    return val if t > 1 else -val


# --------------------------------------------------------------------------
# transform objects

@dataclass(frozen=True)
class TransformSpec:
    kind: str
    gamma: float = 1.0
    zeta: float = 1.0
    sigma: float = 0.0
    p: float = 2.0
    eta: float = 0.0
    q: float = 0.0
    gfun: GFunction | None = field(default=None, compare=False)

    def __post_init__(self):
        k = self.kind
        if k == "power":
            if not 0 < self.gamma <= 1 or not self.zeta > 0:
                raise TransformError("power transform needs gamma in (0,1] and zeta > 0")
        elif k == "shifted_log":
            if not self.sigma > 0:
                raise TransformError("shifted_log needs sigma > 0")
        elif k == "integral_G":
            if self.gfun is None:
                raise TransformError("integral_G needs g")
            probe = np.atleast_1d(self.gfun.primitive(np.array([1e-6, 1e-3, 1.0, 10.0])))
            if np.any(probe <= 0):
                raise TransformError("G must be positive for t > 0")
        elif k == "singular_phi":
            if not self.eta > 0 or not -1 <= self.q < 0:
                raise TransformError("singular_phi needs eta > 0 and q in [-1, 0)")
            object.__setattr__(self, "gfun", GFunction.shifted_power(self.q, self.eta))
        elif k != "log":
            raise TransformError(f"unknown transform kind {k!r}")

    # constructors
    @classmethod
    def power(cls, gamma, zeta=1.0):
        return cls("power", gamma=gamma, zeta=zeta)

    @classmethod
    def log(cls):
        return cls("log")

    @classmethod
    def shifted_log(cls, sigma):
        return cls("shifted_log", sigma=sigma)

    @classmethod
    def integral_G(cls, g, p):
        gf = g if isinstance(g, GFunction) else GFunction(g)
        return cls("integral_G", p=p, gfun=gf)

    @classmethod
    def singular_phi(cls, eta, q, p):
        return cls("singular_phi", eta=eta, q=q, p=p)

    @property
    def is_integral(self) -> bool:
        return self.kind in ("integral_G", "singular_phi")

    # phi and derivatives
    def phi(self, t):
        t = np.asarray(t, float)
        k = self.kind
        if k == "power":
            return self.zeta * t ** self.gamma
        if k == "log":
            with np.errstate(divide="ignore"):
                return np.log(t)
        if k == "shifted_log":
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.log(t - self.sigma)
        return self._phi_integral_vec(t)

    def dphi(self, t):
        t = np.asarray(t, float)
        k = self.kind
        if k == "power":
            return self.zeta * self.gamma * t ** (self.gamma - 1)
        if k == "log":
            return 1.0 / t
        if k == "shifted_log":
            return 1.0 / (t - self.sigma)
        return self.gfun.primitive(t) ** (-1.0 / self.p)

    def _phi_integral_vec(self, t):
        """phi on many points: sort, integrate consecutive gaps, accumulate from 1."""
        flat = np.atleast_1d(t).ravel()
        out = np.full(flat.shape, np.nan)
        ok = np.isfinite(flat) & (flat >= 0)
        vals = flat[ok]
        if vals.size:
            uniq, inv = np.unique(np.append(vals, 1.0), return_inverse=True)
            gf, p = self.gfun, self.p

            def integrand(s):
                return float(gf.primitive(np.array([s]))[0]) ** (-1.0 / p)

            cum = np.zeros(uniq.size)
            for i in range(1, uniq.size):
                a, b = uniq[i - 1], uniq[i]
                cum[i] = cum[i - 1] + integrate.quad(integrand, a, b, epsabs=0,
                                                     epsrel=1e-12, limit=200)[0]
            one = int(np.searchsorted(uniq, 1.0))
            res = cum - cum[one]
            out[ok] = res[inv[:-1]]
        return out.reshape(np.shape(t)) if np.ndim(t) else float(out[0])

    def psi(self, s):
        """Inverse of phi."""
        s = np.asarray(s, float)
        k = self.kind
        if k == "power":
            return (s / self.zeta) ** (1.0 / self.gamma)
        if k == "log":
            return np.exp(s)
        if k == "shifted_log":
            return np.exp(s) + self.sigma
        flat = np.atleast_1d(s).ravel()
        out = np.array([self._invert(v) for v in flat])
        return out.reshape(np.shape(s)) if np.ndim(s) else float(out[0])

    def _invert(self, s):
        phi0 = float(self.phi(np.array([0.0]))[0])
        if s < phi0:
            raise TransformError(f"{s} below the range of phi")
        if s == phi0:
            return 0.0
        lo, hi = 0.0, 1.0
        while float(self.phi(np.array([hi]))[0]) < s:
            lo, hi = hi, 2 * hi
        # Newton on phi(t) = s with bisection fallback; phi' = G^{-1/p} > 0
        return optimize.brentq(lambda t: float(self.phi(np.array([t]))[0]) - s, lo, hi,
                               xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)

    def dpsi(self, s):
        return 1.0 / self.dphi(self.psi(s))

    def d2psi_over_dpsi(self, s):
        """psi''(s) / psi'(s)."""
        s = np.asarray(s, float)
        k = self.kind
        if k == "power":
            return (1.0 / self.gamma - 1.0) / s
        if k in ("log", "shifted_log"):
            return np.ones_like(s)
        # psi' = G(psi)^{1/p}  =>  psi''/psi' = (1/p) g(psi) G(psi)^{1/p - 1}
        t = self.psi(s)
        gf, p = self.gfun, self.p
        G = gf.primitive(t)
        return gf.g(t) * G ** (1.0 / p - 1.0) / p

    # regularization kernel
    def K(self, t):
        """Kernel (phi')^{-p} used by the regularized energy."""
        t = np.asarray(t, float)
        k = self.kind
        p = self.p_for_kernel
        if k == "power":
            c = (self.zeta * self.gamma) ** (-p)
            return c * t ** (p * (1 - self.gamma))
        if k == "log":
            return t ** p
        if k == "shifted_log":
            return np.abs(t - self.sigma) ** p
        return self.gfun.primitive(t)

    def dK(self, t):
        t = np.asarray(t, float)
        k = self.kind
        p = self.p_for_kernel
        if k == "power":
            c = (self.zeta * self.gamma) ** (-p)
            e = p * (1 - self.gamma)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(t > 0, c * e * t ** (e - 1), 0.0) if e != 1 else c + 0 * t
        if k == "log":
            return p * t ** (p - 1)
        if k == "shifted_log":
            d = t - self.sigma
            return p * np.abs(d) ** (p - 1) * np.sign(d)
        return self.gfun.g(t)

    @property
    def p_for_kernel(self) -> float:
        return self.p

    def with_p(self, p: float) -> "TransformSpec":
        """Copy whose kernel exponent is ``p``."""
        return TransformSpec(self.kind, self.gamma, self.zeta, self.sigma, p, self.eta,
                             self.q, self.gfun if self.kind == "integral_G" else None)

    def to_literal(self) -> dict:
        k = self.kind
        if k == "power":
            return {"power": {"gamma": self.gamma, "zeta": self.zeta}}
        if k == "log":
            return {"log": {}}
        if k == "shifted_log":
            return {"shifted_log": {"sigma": self.sigma}}
        if k == "integral_G":
            return {"integral_G": {"g": self.gfun.label, "p": self.p}}
        return {"singular_phi": {"eta": self.eta, "q": self.q, "p": self.p}}


def transform_from_literal(lit: dict) -> TransformSpec:
    if not isinstance(lit, dict) or len(lit) != 1:
        raise TransformError(f"transform literal must have exactly one key: {lit!r}")
    (kind, params), = lit.items()
    params = params or {}
    allowed = {"power": {"gamma", "zeta"}, "log": set(), "shifted_log": {"sigma"},
               "integral_G": {"g", "p"}, "singular_phi": {"eta", "q", "p"}}
    if kind not in allowed:
        raise TransformError(f"unknown transform kind {kind!r}")
    extra = set(params) - allowed[kind]
    if extra:
        raise TransformError(f"unknown key {kind}.{sorted(extra)[0]}")
    if kind == "power":
        return TransformSpec.power(float(params["gamma"]), float(params.get("zeta", 1.0)))
    if kind == "log":
        return TransformSpec.log()
    if kind == "shifted_log":
        return TransformSpec.shifted_log(float(params["sigma"]))
    if kind == "integral_G":
        return TransformSpec.integral_G(g_from_literal(params["g"]), float(params["p"]))
    return TransformSpec.singular_phi(float(params["eta"]), float(params["q"]), float(params["p"]))


def apply(transform: TransformSpec, u: GridField, require=None) -> GridField:
    """Nodewise phi(u).

    Power transforms send dirichlet nodes to 0.  Log transforms mark them (and,
    for ``shifted_log``, every node with u <= sigma) invalid with NaN.
    ``require`` is an optional node mask on which the transform must be
    defined.
    """
    mask = u.mask
    vals = u.values
    out = np.zeros(mask.shape)
    inner = mask.interior
    if np.any(vals[inner] <= 0):
        raise TransformError("transform needs u > 0 on interior nodes")
    k = transform.kind
    if k == "power":
        out[inner] = transform.phi(vals[inner])
    elif k in ("log", "shifted_log"):
        out[:] = np.nan
        sel = inner.copy()
        if k == "shifted_log":
            sel &= vals > transform.sigma
        if require is not None and np.any(require & ~sel):
            raise TransformError("u <= sigma on requested nodes")
        if not sel.any():
            raise TransformError("transform undefined on every node")
        out[sel] = transform.phi(vals[sel])
    else:
        nonext = ~mask.exterior
        out[nonext] = transform.phi(np.where(inner, vals, 0.0)[nonext])
    return GridField(mask, out)


# --------------------------------------------------------------------------
# sufficient conditions on g

@dataclass
class GConditionReport:
    concavity_defect: float
    hc_defect: float
    samples: int
    tol: float

    @property
    def concave_root_holds(self) -> bool:
        return self.concavity_defect <= self.tol

    @property
    def harmonic_ratio_holds(self) -> bool:
        return self.hc_defect <= self.tol

    @property
    def holds(self) -> bool:
        return self.concave_root_holds and self.harmonic_ratio_holds

    def as_dict(self):
        return {"concavity_defect": self.concavity_defect, "hc_defect": self.hc_defect,
                "samples": self.samples, "tol": self.tol, "holds": self.holds}


def check_g_conditions(g, p: float, t_range, samples: int = 2000, tol: float = 1e-9) -> GConditionReport:
    """Sample (i) concavity of G^{1/p} and (ii) harmonic concavity of g/G.

    Both are tested on consecutive equispaced triples, where the middle sample
    is the exact midpoint, so no interpolation enters.
    """
    gf = g if isinstance(g, GFunction) else GFunction(g)
    t0, t1 = map(float, t_range)
    t = np.linspace(t0, t1, samples)
    G = np.asarray(gf.primitive(t), float)
    if np.any(G <= 0):
        raise TransformError("G must be positive on the range")
    w = G ** (1.0 / p)
    conc = float(np.max(0.5 * (w[:-2] + w[2:]) - w[1:-1]))
    r = np.asarray(gf.g(t), float) / G
    a, b, m = r[:-2], r[2:], r[1:-1]
    hc = float(np.max(a * b / (0.5 * a + 0.5 * b) - m))
    return GConditionReport(max(conc, 0.0), max(hc, 0.0), samples, tol)


# --------------------------------------------------------------------------
# transformed source

@dataclass(frozen=True)
class BSourceSpec:
    """Data of the transformed source.

    The original source is ``f(x, u) = h_weight(x, u) * g(u) + k_term(x, u)``;
    ``transform`` supplies psi.  Callables act on arrays of points ``x``
    (shape (..., 2)) and values ``u``.
    """

    p: float
    transform: TransformSpec
    h_weight: Callable
    g: Callable
    k_term: Callable | None = None
    epsilon: float = 0.0

    def f(self, x, u):
        out = self.h_weight(x, u) * self.g(u)
        if self.k_term is not None:
            out = out + self.k_term(x, u)
        return out


def _t_domain_ok(transform: TransformSpec, t) -> bool:
    t = np.asarray(t, float)
    if transform.kind == "power":
        return bool(np.all(t > 0))
    if transform.is_integral:
        lo = float(transform.phi(np.array([0.0]))[0])
        return bool(np.all(t > lo))
    return bool(np.all(np.isfinite(t)))


def evaluate_B(spec: BSourceSpec, x, t, xi) -> np.ndarray:
    """p f(x,psi)/psi'^{p-1} + p H^{(p-2)/p} ((p-1)|xi|^2 - eps) psi''/psi'.

    ``x`` has shape (..., 2), ``t`` shape (...), ``xi`` shape (..., 2) or a
    magnitude array of shape (...).
    """
    t = np.asarray(t, float)
    if not _t_domain_ok(spec.transform, t):
        raise TransformError("t outside the range of the transform")
    p, eps = spec.p, spec.epsilon
    xi = np.asarray(xi, float)
    xi2 = np.sum(xi * xi, axis=-1) if xi.ndim and xi.shape[-1:] == (2,) and xi.ndim == np.ndim(t) + 1 else xi * xi
    tr = spec.transform
    u = tr.psi(t)
    dpsi = tr.dpsi(t)
    first = p * spec.f(x, u) / dpsi ** (p - 1)
    coef = (p - 1) * xi2 - eps
    base = eps + xi2
    with np.errstate(divide="ignore", invalid="ignore"):
        hpow = np.where(base > 0, base ** ((p - 2) / 2), 0.0)
    second = np.where(coef == 0, 0.0, p * hpow * coef) * tr.d2psi_over_dpsi(t)
    return first + second


@dataclass
class BConditionReport:
    monotonicity_violations: int
    mu: float
    positivity_min: float
    hc_defect: list
    samples: int
    tol: float
    scale: float = 1.0

    @property
    def nonincreasing(self) -> bool:
        return self.monotonicity_violations == 0

    @property
    def strictly_decreasing(self) -> bool:
        return self.mu > self.tol

    @property
    def positive(self) -> bool:
        return self.positivity_min > 0

    @property
    def harmonic_concave(self) -> bool:
        return max(self.hc_defect) <= self.tol * max(1.0, self.scale)

    def as_dict(self):
        return {"monotonicity_violations": self.monotonicity_violations, "mu": self.mu,
                "positivity_min": self.positivity_min, "hc_defect": self.hc_defect,
                "B1": self.nonincreasing, "B2": self.strictly_decreasing,
                "B3": self.positive, "B4": self.harmonic_concave,
                "mu_boundary_case": abs(self.mu) <= self.tol}


def check_B_conditions(spec, box: dict, n: int = 16, hc_n: int = 6, tol: float = 1e-9) -> BConditionReport:
    """Sample the four structural conditions on B over a box.

    ``spec`` is a :class:`BSourceSpec` or a callable ``B(x, t, xi_magnitude)``.
    ``box`` has keys ``x`` (two intervals), ``t`` and ``xi`` (magnitude
    interval).  The lattice has ``n`` values of t and |xi| and ``n`` points
    of x on a square sub-lattice; harmonic concavity in (x, t) is checked on
    four |xi| slices with ``hc_n`` points per axis.
    """
    fn = spec if callable(spec) and not isinstance(spec, BSourceSpec) else (
        lambda x, t, xi: evaluate_B(spec, x, t, xi))
    (x0, x1), (y0, y1) = box["x"]
    t0, t1 = box["t"]
    z0, z1 = box["xi"]
    side = max(int(round(math.sqrt(n))), 2)
    xs = np.stack(np.meshgrid(np.linspace(x0, x1, side), np.linspace(y0, y1, side),
                              indexing="ij"), axis=-1).reshape(-1, 2)
    ts = np.linspace(t0, t1, n)
    zs = np.linspace(z0, z1, n)
    X = np.broadcast_to(xs[:, None, None, :], (len(xs), n, n, 2))
    T = np.broadcast_to(ts[None, :, None], (len(xs), n, n))
    Z = np.broadcast_to(zs[None, None, :], (len(xs), n, n))
    B = np.asarray(fn(X, T, Z), float)
    scale = float(np.max(np.abs(B))) or 1.0
    diffs = B[:, 1:, :] - B[:, :-1, :]
    violations = int(np.sum(diffs > tol * scale))
    dt = 1e-6 * (t1 - t0)
    Tp = np.clip(T + dt, t0, t1)
    Tm = np.clip(T - dt, t0, t1)
    dB = (np.asarray(fn(X, Tp, Z)) - np.asarray(fn(X, Tm, Z))) / (Tp - Tm)
    mu = float(-np.max(dB))
    hc = []
    for z in zs[np.linspace(0, n - 1, 4).astype(int)]:
        def slice_fn(pts, z=z):
            return np.asarray(fn(pts[..., :2], pts[..., 2], np.full(pts.shape[:-1], z)), float)
        rep = harmonic_concavity_defect(slice_fn, [(x0, x1), (y0, y1), (t0, t1)], n=hc_n)
        hc.append(rep.sup_defect)
    return BConditionReport(violations, mu, float(B.min()), hc, n, tol, scale)
