"""Result types and small numerical helpers shared by the experiment runners."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..discretization import GridField
from ..geometry import signed_distance
from ..transforms import c_pq


@dataclass
class ExperimentCase:
    """One configured problem inside an experiment."""

    name: str
    spec: object
    transform: object
    expected: dict = field(default_factory=dict)
    sweep: list | None = None

    def __post_init__(self):
        if self.sweep is not None:
            vals = [float(s) for s in self.sweep]
            if vals != sorted(vals):
                raise ValueError(f"sweep of {self.name} must be sorted")


@dataclass
class CaseResult:
    name: str
    passed: bool
    sup_defect: float | None = None
    bound: float | None = None
    tau: float | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return clean(asdict(self))


@dataclass
class ExperimentResult:
    name: str
    cases: list
    sweeps: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.cases)

    def to_dict(self) -> dict:
        return clean({"name": self.name, "passed": self.passed, "error": self.error,
                      "config": self.config, "cases": [c.to_dict() for c in self.cases],
                      "sweeps": self.sweeps})


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x (positive entries only)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def strictly_decreasing(values) -> bool:
    v = list(values)
    return all(b < a for a, b in zip(v, v[1:]))


def sup_distance(u: GridField, w: GridField) -> float:
    """max |u - w| over nodes valid in both fields."""
    ok = u.valid & w.valid
    return float(np.max(np.abs(u.values[ok] - w.values[ok])))


def inf_normalized(u: GridField) -> GridField:
    return u.with_values(u.values / np.nanmax(u.values))


def depth_region(u: GridField, domain, delta: float) -> np.ndarray:
    """Nodes of the mask lying in the inner parallel set at depth delta."""
    sd = signed_distance(domain, u.mask.coords)
    return (sd > delta) & u.valid


@dataclass
class PerturbedBoundInputs:
    """Quantities entering the explicit perturbed concavity bound."""

    delta: float
    m_delta_u: float
    frak_m: float
    frak_M: float
    osc_a: float
    C_pq: float

    def __post_init__(self):
        if not self.frak_m > 0:
            raise ValueError("min of a over the inner set must be positive")
        if self.frak_M < self.frak_m:
            raise ValueError("max of a below its min")

    @classmethod
    def measure(cls, u: GridField, a_values: np.ndarray, domain, delta: float,
                p: float, q: float) -> "PerturbedBoundInputs":
        """Minima over the inner set at depth delta/2; osc(a) over all non-exterior nodes."""
        inner = depth_region(u, domain, delta / 2) & u.mask.interior
        if not inner.any():
            raise ValueError(f"no nodes deeper than {delta / 2}")
        av = a_values[inner]
        everywhere = a_values[~u.mask.exterior]
        return cls(delta, float(u.values[inner].min()), float(av.min()), float(av.max()),
                   float(everywhere.max() - everywhere.min()), c_pq(p, q))

    def constant(self, u_max: float, gamma: float) -> float:
        return (self.C_pq * (u_max / self.m_delta_u) ** gamma
                * (2 + self.osc_a / self.frak_m) / self.frak_m)

    def bound(self, u_max: float, gamma: float) -> float:
        """C * osc(a) without the grid tolerance."""
        return self.constant(u_max, gamma) * self.osc_a
