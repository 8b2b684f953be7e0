"""Positive solutions of -Δ_p u = f(x, u) with zero Dirichlet data.

Dirichlet problems are solved by minimizing the discrete energy.  The default
minimizer is a damped Newton method on the energy (sparse Hessian, backtracking
Armijo search); a limited-memory BFGS variant with the same line search and
stopping rule is available as ``method="lbfgs"``.  Eigenpairs come from
nonlinear inverse iteration and ground states from a Newton solve of the
Euler-Lagrange equation started at the Nehari-scaled eigenfunction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import (
    EnergyFunctional,
    GridField,
    GridMask,
    rasterize,
)
from .geometry import signed_distance


class SolverError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConvergenceError(SolverError):
    pass


class PositivityError(SolverError):
    pass


# --------------------------------------------------------------------------
# weights a(x)

@dataclass(frozen=True)
class Weight:
    """Positive coefficient a(x).

    kinds: ``const`` (value), ``affine`` (c0 + c1 x1 + c2 x2), ``sin``
    (1 + eps sin(k x1)), ``hardy_henon`` ((|x1| + |x2|)^omega) and ``custom``
    wrapping a callable.
    """

    kind: str = "const"
    params: tuple = (1.0,)
    fn: Callable | None = field(default=None, compare=False, repr=False)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            x1, x2 = pts, np.zeros_like(pts)
        else:
            x1, x2 = pts[..., 0], pts[..., 1]
        k = self.kind
        if k == "const":
            return np.full(x1.shape, float(self.params[0]))
        if k == "affine":
            c0, c1, c2 = self.params
            return c0 + c1 * x1 + c2 * x2
        if k == "sin":
            eps, freq = self.params
            return 1.0 + eps * np.sin(freq * x1)
        if k == "hardy_henon":
            (omega,) = self.params
            return (np.abs(x1) + np.abs(x2)) ** omega
        if k == "custom":
            return np.asarray(self.fn(pts), dtype=float)
        raise ValueError(f"unknown weight kind {k!r}")

    def scaled(self, c: float) -> "Weight":
        base = self
        return Weight("custom", (c,), lambda pts: c * base(pts))

    def to_literal(self):
        if self.kind == "const":
            return float(self.params[0])
        if self.kind == "affine":
            return {"affine": list(self.params)}
        if self.kind == "sin":
            return {"sin": {"eps": self.params[0], "k": self.params[1]}}
        if self.kind == "hardy_henon":
            return {"hardy_henon": {"omega": self.params[0]}}
        return {"custom": repr(self.fn)}


def weight_from_literal(lit) -> Weight:
    if isinstance(lit, (int, float)):
        return Weight("const", (float(lit),))
    if isinstance(lit, dict) and len(lit) == 1:
        (k, v), = lit.items()
        if k == "affine":
            return Weight("affine", tuple(float(c) for c in v))
        if k == "sin":
            return Weight("sin", (float(v["eps"]), float(v["k"])))
        if k == "hardy_henon":
            return Weight("hardy_henon", (float(v["omega"]),))
        if k == "const":
            return Weight("const", (float(v),))
    raise ValueError(f"cannot interpret weight literal {lit!r}")


# --------------------------------------------------------------------------
# sources

@dataclass
class SourceTerms:
    """Vectorized F, f = F', df = F'' acting on the interior vector."""

    F: Callable
    f: Callable
    df: Callable


def _powers(a, q):
    """Terms of a*|t|^(q+1)/(q+1) (odd extension of f); q = 0 is linear."""
    if q == 0:
        return SourceTerms(lambda t: a * t, lambda t: a + 0 * t, lambda t: 0 * t)

    def F(t):
        return a * np.abs(t) ** (q + 1) / (q + 1)

    def f(t):
        return a * np.sign(t) * np.abs(t) ** q

    def df(t):
        return a * q * np.maximum(np.abs(t), 1e-300) ** (q - 1)

    return SourceTerms(F, f, df)


@dataclass(frozen=True)
class PowerSource:
    q: float
    weight: Weight = Weight()
    kind = "power"

    def terms(self, points, p):
        return _powers(self.weight(points), self.q)

    def f_values(self, points, u):
        return self.weight(points) * np.abs(u) ** self.q

    def to_literal(self):
        return {"type": "power", "q": self.q, "a": self.weight.to_literal()}


@dataclass(frozen=True)
class SumPowersSource:
    """f(u) = a(x) (u^q + u^r)."""

    q: float
    r: float
    weight: Weight = Weight()
    kind = "sum_powers"

    def terms(self, points, p):
        a = self.weight(points)
        s1, s2 = _powers(a, self.q), _powers(a, self.r)
        return SourceTerms(lambda t: s1.F(t) + s2.F(t), lambda t: s1.f(t) + s2.f(t),
                           lambda t: s1.df(t) + s2.df(t))

    def f_values(self, points, u):
        return self.weight(points) * (np.abs(u) ** self.q + np.abs(u) ** self.r)

    def to_literal(self):
        return {"type": "sum_powers", "q": self.q, "r": self.r, "a": self.weight.to_literal()}


@dataclass(frozen=True)
class SingularSource:
    """f(u) = a(x) (u + eta)^q with q in [-1, 0); extended linearly for u < 0."""

    q: float
    eta: float
    weight: Weight = Weight()
    kind = "singular"

    def terms(self, points, p):
        a = self.weight(points)
        q, eta = self.q, self.eta

        def F(t):
            tp = np.maximum(t, 0.0)
            if q == -1:
                pos = np.log1p(tp / eta)
            else:
                pos = ((tp + eta) ** (q + 1) - eta ** (q + 1)) / (q + 1)
            return a * np.where(t >= 0, pos, eta ** q * t)

        def f(t):
            return a * np.where(t >= 0, (np.maximum(t, 0.0) + eta) ** q, eta ** q)

        def df(t):
            return a * np.where(t >= 0, q * (np.maximum(t, 0.0) + eta) ** (q - 1), 0.0)

        return SourceTerms(F, f, df)

    def f_values(self, points, u):
        return self.weight(points) * (np.maximum(u, 0) + self.eta) ** self.q

    def to_literal(self):
        return {"type": "singular", "q": self.q, "eta": self.eta, "a": self.weight.to_literal()}


@dataclass(frozen=True)
class EigenSource:
    weight: Weight = Weight()
    kind = "eigen"

    def to_literal(self):
        return {"type": "eigen", "a": self.weight.to_literal()}


@dataclass(frozen=True)
class GroundStateSource:
    q: float
    kind = "ground_state"

    def terms(self, points, p):
        return _powers(np.ones(len(points)), self.q)

    def f_values(self, points, u):
        return np.abs(u) ** self.q

    def to_literal(self):
        return {"type": "ground_state", "q": self.q}


@dataclass(frozen=True)
class GivenSource:
    """A source f(x) independent of u, sampled on interior nodes."""

    values: np.ndarray
    kind = "given"

    def terms(self, points, p):
        g = np.asarray(self.values, dtype=float)
        return SourceTerms(lambda t: g * t, lambda t: g + 0 * t, lambda t: 0 * t)


def source_from_literal(lit: dict):
    kind = lit.get("type")
    a = weight_from_literal(lit.get("a", 1.0))
    if kind == "power":
        return PowerSource(float(lit["q"]), a)
    if kind == "torsion":
        return PowerSource(0.0, a)
    if kind == "sum_powers":
        return SumPowersSource(float(lit["q"]), float(lit["r"]), a)
    if kind == "singular":
        return SingularSource(float(lit["q"]), float(lit["eta"]), a)
    if kind == "eigen":
        return EigenSource(a)
    if kind == "ground_state":
        return GroundStateSource(float(lit["q"]))
    raise ValueError(f"unknown source type {kind!r}")


# --------------------------------------------------------------------------
# problem and result types

@dataclass(frozen=True)
class ProblemSpec:
    p: float
    source: object
    domain: object
    h: float
    epsilon_reg: float = 1e-8
    paper_epsilon: float = 0.0
    kernel: object = None
    tol: float = 1e-10
    max_iters: int = 100_000
    seed: int = 0

    def __post_init__(self):
        p = self.p
        if not p > 1:
            raise ValueError("p must exceed 1")
        s = self.source
        if isinstance(s, PowerSource) and not 0 <= s.q <= p - 1:
            raise ValueError(f"power source needs 0 <= q <= p-1, got q={s.q}")
        if isinstance(s, SumPowersSource) and not 0 < s.r <= s.q < p - 1:
            raise ValueError("sum_powers needs 0 < r <= q < p-1")
        if isinstance(s, SingularSource):
            if not -1 <= s.q < 0:
                raise ValueError("singular source needs q in [-1, 0)")
            if not s.eta > 0:
                raise ValueError("singular source needs eta > 0")
        if isinstance(s, GroundStateSource) and not p - 1 < s.q < 10:
            raise ValueError("ground state needs p-1 < q < 10")
        if self.paper_epsilon < 0 or self.epsilon_reg < 0:
            raise ValueError("regularization parameters must be nonnegative")

    def source_terms(self, mask: GridMask):
        return self.source.terms(mask.interior_points, self.p)

    @property
    def mask(self) -> GridMask:
        return _mask_cache(self.domain, self.h)


_MASKS: dict = {}


def _mask_cache(domain, h) -> GridMask:
    key = (id(domain), h)
    hit = _MASKS.get(key)
    if hit is None or hit[0] is not domain:
        if len(_MASKS) > 64:
            _MASKS.clear()
        hit = (domain, rasterize(domain, h))
        _MASKS[key] = hit
    return hit[1]


@dataclass
class SolveResult:
    u: GridField
    multiplier: float | None
    iterations: int
    residual: float
    energy: float
    converged: bool = True
    history: list = field(default_factory=list, repr=False)
    info: dict = field(default_factory=dict)

    def summary(self) -> dict:
        vals = self.u.interior_values
        return {
            "lambda": self.multiplier,
            "iterations": self.iterations,
            "residual": self.residual,
            "energy": self.energy,
            "min_u": float(vals.min()),
            "max_u": float(vals.max()),
        }


# --------------------------------------------------------------------------
# minimization

ROUNDOFF = 1e-14


def _newton_direction(fun, x, g, near, shift_tries=3):
    # far from a minimizer the clipped source curvature keeps the model positive
    # definite so the iteration is not attracted to saddle points; close to it
    # the exact Hessian restores quadratic convergence
    for mode in (("full", "convex") if near else ("convex",)):
        hmat = fun.hessian(x, mode)
        shift = 0.0
        diag_scale = float(np.abs(hmat.diagonal()).mean()) or 1.0
        for _ in range(shift_tries):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                try:
                    mat = hmat if shift == 0 else hmat + shift * sp.identity(hmat.shape[0], format="csr")
                    d = spla.spsolve(mat.tocsc(), -g)
                except RuntimeError:
                    d = None
            if d is not None and np.all(np.isfinite(d)) and g @ d < 0:
                return d
            shift = diag_scale * (1e-10 if shift == 0 else shift / diag_scale * 1e3)
    return -g


class _LBFGS:
    def __init__(self, m=10):
        self.m = m
        self.s, self.y = [], []

    def direction(self, g):
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(self.s), reversed(self.y)):
            rho = 1.0 / (y @ s)
            a = rho * (s @ q)
            alphas.append((a, rho, s, y))
            q -= a * y
        if self.s:
            s, y = self.s[-1], self.y[-1]
            q *= (s @ y) / (y @ y)
        for a, rho, s, y in reversed(alphas):
            b = rho * (y @ q)
            q += (a - b) * s
        return -q

    def update(self, s, y):
        if s @ y > 1e-16 * np.linalg.norm(s) * np.linalg.norm(y):
            self.s.append(s)
            self.y.append(y)
            if len(self.s) > self.m:
                self.s.pop(0)
                self.y.pop(0)


def _minimize(fun: EnergyFunctional, x0, tol, max_iters, method="newton"):
    """Core descent loop. Returns (x, E, grad, iterations, converged, history)."""
    x = np.array(x0, dtype=float)
    E, g = fun.value_and_gradient(x)
    history = [E]
    lbfgs = _LBFGS() if method == "lbfgs" else None
    it = 0
    converged = False
    stalls = 0
    while True:
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= tol * max(1.0, abs(E)):
            converged = True
            break
        if it >= max_iters:
            break
        it += 1
        if method == "newton":
            d = _newton_direction(fun, x, g, True)
        else:
            d = lbfgs.direction(g)
            if g @ d >= 0:
                lbfgs = _LBFGS()
                d = -g
        slope = float(g @ d)
        alpha = 1.0
        accepted = False
        # a predicted decrease below rounding cannot be verified by Armijo
        # (it would accept steps that leave E unchanged), so go to the full step
        if -slope <= ROUNDOFF * max(1.0, abs(E)):
            alpha = 0.0
        while alpha > 1e-20:
            xn = x + alpha * d
            En = fun.value(xn)
            if np.isfinite(En) and En <= E + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # roundoff regime: accept a full step that does not raise the energy
            # beyond rounding and strictly shrinks the gradient
            xn = x + d
            En = fun.value(xn)
            gn = fun.gradient(xn)
            if En <= E + ROUNDOFF * max(1.0, abs(E)) and np.max(np.abs(gn)) < gnorm:
                if lbfgs is not None:
                    lbfgs.update(xn - x, gn - g)
                x, E, g = xn, En, gn
                history.append(E)
                stalls += 1
                if stalls > 50:
                    break
                continue
            break
        gn = fun.gradient(xn)
        if lbfgs is not None:
            lbfgs.update(xn - x, gn - g)
        x, E, g = xn, En, gn
        history.append(E)
    return x, E, g, it, converged, history


def _finish(spec, mask, x, E, g, it, converged, history, tol, raise_on_fail=True, positive=True):
    u = GridField.from_interior(mask, x)
    residual = float(np.max(np.abs(g))) if g.size else 0.0
    res = SolveResult(u, None, it, residual, E, converged, history)
    if not converged and raise_on_fail:
        raise ConvergenceError(
            f"no convergence after {it} iterations (residual {residual:.3e})", best=res)
    if positive:
        if x.sum() < 0:
            x = -x
            res.u = GridField.from_interior(mask, x)
        if x.size and x.min() <= 0:
            raise PositivityError(f"solution not positive (min {x.min():.3e})", best=res)
    return res


def minimize_energy(spec: ProblemSpec, init: GridField, method: str = "newton",
                    epsilon_reg: float | None = None, tol: float | None = None,
                    max_iters: int | None = None, positive: bool = True,
                    rescale_init: bool = False) -> SolveResult:
    """Minimize the discrete energy of ``spec`` starting from ``init``.

    Stops when the gradient sup-norm is at most ``tol * max(1, |E|)``.
    """
    mask = init.mask
    fun = EnergyFunctional(spec, mask, epsilon_reg)
    tol = spec.tol if tol is None else tol
    if rescale_init:
        init = GridField.from_interior(mask, _ray_minimizer(fun, init.interior_values))
    max_iters = spec.max_iters if max_iters is None else max_iters
    out = _minimize(fun, init.interior_values, tol, max_iters, method)
    return _finish(spec, mask, *out, tol, positive=positive)


def _ray_minimizer(fun: EnergyFunctional, x: np.ndarray) -> np.ndarray:
    """Best multiple 2^k x (k = -30..30) of a starting vector."""
    ks = np.arange(-30, 31)
    vals = [fun.value(2.0 ** k * x) for k in ks]
    k = int(ks[int(np.nanargmin(vals))])
    return 2.0 ** k * x


def default_init(mask: GridMask, domain, scale: float = 0.5) -> GridField:
    """A positive bump proportional to the distance to the boundary."""
    sd = signed_distance(domain, mask.interior_points)
    return GridField.from_interior(mask, scale * np.maximum(sd, mask.h / 4))


def random_init(mask: GridMask, domain, seed: int) -> GridField:
    rng = np.random.default_rng(seed)
    sd = signed_distance(domain, mask.interior_points)
    return GridField.from_interior(mask, np.maximum(sd, mask.h / 4) * rng.uniform(0.1, 2.0, sd.shape))


def _smoothing_stages(spec: ProblemSpec):
    if spec.p == 2:
        return [0.0]
    if spec.p > 2:
        return [spec.epsilon_reg, 0.0] if spec.epsilon_reg > 0 else [0.0]
    return [spec.epsilon_reg]


def solve_dirichlet(spec: ProblemSpec, init: GridField | None = None,
                    method: str = "newton") -> SolveResult:
    """Positive solution for power, sum-of-powers and singular sources."""
    if not isinstance(spec.source, (PowerSource, SumPowersSource, SingularSource, GivenSource)):
        raise ValueError(f"solve_dirichlet does not handle {type(spec.source).__name__}")
    mask = spec.mask if init is None else init.mask
    cur = default_init(mask, spec.domain) if init is None else init
    total = 0
    result = None
    for i, eps in enumerate(_smoothing_stages(spec)):
        result = minimize_energy(spec, cur, method=method, epsilon_reg=eps,
                                 rescale_init=(init is None and i == 0))
        total += result.iterations
        cur = result.u
    result.iterations = total
    result.info["epsilon_reg"] = _smoothing_stages(spec)[-1]
    result.info["hopf_c"] = hopf_constant(result.u)
    return result


def hopf_constant(u: GridField) -> float:
    """min over dirichlet nodes of (largest interior-neighbour value) / h."""
    mask = u.mask
    vals = np.where(mask.interior, u.values, -np.inf)
    best = np.full(mask.shape, -np.inf)
    for ax in range(mask.dim):
        for sh in (1, -1):
            rolled = np.roll(vals, sh, axis=ax)
            edge = [slice(None)] * mask.dim
            edge[ax] = 0 if sh == 1 else -1
            rolled[tuple(edge)] = -np.inf
            best = np.maximum(best, rolled)
    sel = mask.dirichlet & np.isfinite(best)
    if not sel.any():
        return float("nan")
    return float(best[sel].min() / mask.h)


def pde_residual(spec: ProblemSpec, u: GridField, multiplier: float = 1.0) -> np.ndarray:
    """Nodal residual of -Δ_p u - multiplier * f(x, u) (energy gradient / cell measure)."""
    mask = u.mask
    pts = mask.interior_points
    x = u.interior_values
    grad_only = replace(spec, source=GivenSource(np.zeros(len(x))), paper_epsilon=0.0)
    fun = EnergyFunctional(grad_only, mask, 0.0 if spec.p >= 2 else spec.epsilon_reg)
    lap = fun.gradient(x) / mask.cell_measure
    src = spec.source
    if isinstance(src, EigenSource):
        f = src.weight(pts) * np.abs(x) ** (spec.p - 1)
    else:
        f = src.f_values(pts, x)
    return lap - multiplier * f


# --------------------------------------------------------------------------
# eigenvalue problem

def _gradient_only(spec: ProblemSpec, g):
    return replace(spec, source=GivenSource(g), paper_epsilon=0.0)


def _rayleigh(spec, mask, x, a):
    fun = EnergyFunctional(_gradient_only(spec, np.zeros(len(x))), mask,
                           0.0 if spec.p >= 2 else spec.epsilon_reg)
    num = spec.p * fun.gradient_energy(x)
    den = float(np.sum(a * np.abs(x) ** spec.p)) * mask.cell_measure
    return num / den


def solve_eigen(spec: ProblemSpec, init: GridField | None = None,
                tol: float = 1e-10, max_outer: int = 2000) -> SolveResult:
    """First eigenpair of -Δ_p u = λ a(x) |u|^{p-2} u by inverse iteration.

    Each step solves -Δ_p w = a u^{p-1} and renormalizes so that
    sum a |w|^p h^d = 1.  λ is the Rayleigh quotient.  Iteration stops when λ
    changes by at most ``tol`` relatively and the eigenfunction by at most
    ``10*tol`` in sup norm.
    """
    if not isinstance(spec.source, EigenSource):
        raise ValueError("solve_eigen needs an eigen source")
    p = spec.p
    mask = spec.mask if init is None else init.mask
    a = spec.source.weight(mask.interior_points)
    if np.any(a <= 0):
        raise ValueError("eigen weight must be positive")
    dv = mask.cell_measure
    x = (default_init(mask, spec.domain) if init is None else init).interior_values.copy()
    x = np.abs(x)

    def normalize(v):
        return v / (np.sum(a * np.abs(v) ** p) * dv) ** (1 / p)

    x = normalize(x)
    lam_old = _rayleigh(spec, mask, x, a)
    solve_linear = None
    if p == 2:
        fun = EnergyFunctional(_gradient_only(spec, a), mask, 0.0)
        lu = spla.splu(fun.hessian(x, "none").tocsc())
        solve_linear = lambda rhs: lu.solve(rhs)  # noqa: E731
    history = [lam_old]
    inner_total = 0
    converged = False
    for outer in range(1, max_outer + 1):
        rhs = a * np.abs(x) ** (p - 1)
        if solve_linear is not None:
            w = solve_linear(rhs * dv)
        else:
            inner = _gradient_only(spec, rhs)
            scale = lam_old ** (-1 / (p - 1))
            res = solve_dirichlet(inner, GridField.from_interior(mask, scale * x))
            inner_total += res.iterations
            w = res.u.interior_values
        xn = normalize(np.abs(w))
        lam = _rayleigh(spec, mask, xn, a)
        history.append(lam)
        dx = float(np.max(np.abs(xn - x)) / np.max(np.abs(xn)))
        x = xn
        if abs(lam - lam_old) <= tol * lam and dx <= 10 * tol:
            converged = True
            break
        lam_old = lam
    u = GridField.from_interior(mask, x)
    resid = float(np.max(np.abs(pde_residual(spec, u, lam))))
    result = SolveResult(u, lam, outer, resid, lam / p, converged, history,
                         {"inner_iterations": inner_total, "hopf_c": hopf_constant(u)})
    if not converged:
        raise ConvergenceError(f"eigen iteration did not converge in {max_outer} steps", best=result)
    return result


# --------------------------------------------------------------------------
# ground states (superhomogeneous)

def _newton_equation(spec, mask, x, tol, max_iters=200):
    """Newton on the Euler-Lagrange equation (saddle points allowed)."""
    fun = EnergyFunctional(spec, mask, 0.0 if spec.p >= 2 else spec.epsilon_reg)
    g = fun.gradient(x)
    nrm = float(np.linalg.norm(g))
    for it in range(1, max_iters + 1):
        scale = float(np.max(np.abs(spec.source.f_values(mask.interior_points, x)))) * mask.cell_measure
        if np.max(np.abs(g)) <= tol * scale:
            return x, g, it - 1, True
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            d = spla.spsolve(fun.hessian(x, "full").tocsc(), -g)
        if not np.all(np.isfinite(d)):
            return x, g, it, False
        alpha = 1.0
        while alpha > 1e-8:
            xn = x + alpha * d
            gn = fun.gradient(xn)
            nn = float(np.linalg.norm(gn))
            if np.all(xn > 0) and nn < (1 - 1e-4 * alpha) * nrm:
                break
            alpha *= 0.5
        else:
            return x, g, it, False
        x, g, nrm = xn, gn, nn
    return x, g, max_iters, False


def solve_ground_state(spec: ProblemSpec, tol: float = 1e-11) -> SolveResult:
    """Positive solution of -Δ_p u = u^q for p-1 < q.

    The solution is reached by Newton's method started from the first
    eigenfunction scaled onto the Nehari manifold.  ``multiplier`` is the λ of
    the constrained form -Δ_p w = λ w^q with sum w^{q+1} h^d = 1; the
    returned ``u`` solves the unscaled equation and ``info['M_q']`` is its max.
    """
    if not isinstance(spec.source, GroundStateSource):
        raise ValueError("solve_ground_state needs a ground_state source")
    p, q = spec.p, spec.source.q
    mask = spec.mask
    dv = mask.cell_measure
    eig = solve_eigen(replace(spec, source=EigenSource()))
    phi = eig.u.interior_values / eig.u.interior_values.max()
    grad_fun = EnergyFunctional(_gradient_only(spec, np.zeros(len(phi))), mask,
                                0.0 if p >= 2 else spec.epsilon_reg)
    a_num = p * grad_fun.gradient_energy(phi)
    b_den = float(np.sum(phi ** (q + 1))) * dv
    x = (a_num / b_den) ** (1 / (q + 1 - p)) * phi
    x, g, iters, ok = _newton_equation(spec, mask, x, tol)
    if not ok:
        # continuation in q from just above p-1
        qs = list(np.linspace(p - 1 + 0.05 * (q - p + 1), q, 8))
        x = None
        q_prev = qs[0]
        for qk in qs:
            sub = replace(spec, source=GroundStateSource(float(qk)))
            if x is None:
                b_den = float(np.sum(phi ** (qk + 1))) * dv
                x = (a_num / b_den) ** (1 / (qk + 1 - p)) * phi
            else:
                # keep M^{q-p+1} fixed when moving to the next exponent
                m = float(np.max(x))
                x = x / m * m ** ((q_prev - p + 1) / (qk - p + 1))
            x, g, it2, ok = _newton_equation(sub, mask, x, tol)
            iters += it2
            q_prev = qk
            if not ok:
                break
    u = GridField.from_interior(mask, x)
    resid_vec = pde_residual(spec, u)
    resid = float(np.max(np.abs(resid_vec)))
    c = float(np.sum(x ** (q + 1)) * dv) ** (1 / (q + 1))
    lam = c ** (q - p + 1)
    energy = EnergyFunctional(spec, mask, 0.0).value(x)
    result = SolveResult(u, lam, iters, resid, energy, ok, [],
                         {"M_q": float(x.max()), "relative_residual": resid / float(np.max(x ** q)),
                          "hopf_c": hopf_constant(u)})
    if not ok:
        raise ConvergenceError("ground state Newton iteration failed", best=result)
    if x.min() <= 0:
        raise PositivityError("ground state not positive", best=result)
    return result


# --------------------------------------------------------------------------
# singular continuation

def solve_singular_continuation(spec: ProblemSpec, eta_schedule) -> list[SolveResult]:
    """Solve -Δ_p u = a (u + eta)^q along a decreasing eta schedule.

    Each stage is warm-started from the previous one; ``info['step_distance']``
    holds the sup distance to the previous stage.
    """
    etas = [float(e) for e in eta_schedule]
    if not etas:
        raise ValueError("eta schedule is empty")
    if any(e <= 0 for e in etas) or any(b >= a for a, b in zip(etas, etas[1:])):
        raise ValueError("eta schedule must be positive and strictly decreasing")
    src = spec.source
    if not isinstance(src, SingularSource):
        raise ValueError("continuation needs a singular source")
    out = []
    prev = None
    for eta in etas:
        stage = replace(spec, source=replace(src, eta=eta))
        try:
            res = solve_dirichlet(stage, prev.u if prev is not None else None)
        except SolverError as exc:
            exc.partial = out
            raise
        res.info["eta"] = eta
        res.info["step_distance"] = (float(np.max(np.abs(res.u.values - prev.u.values)))
                                     if prev is not None else None)
        out.append(res)
        prev = res
    return out


def solve(spec: ProblemSpec) -> SolveResult:
    """Dispatch on the source kind."""
    if isinstance(spec.source, EigenSource):
        return solve_eigen(spec)
    if isinstance(spec.source, GroundStateSource):
        return solve_ground_state(spec)
    return solve_dirichlet(spec)
