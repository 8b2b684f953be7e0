"""Named experiments, their default configurations and dispatch."""

from __future__ import annotations

import copy
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import runners
from .core import ExperimentResult


def _exact_cases() -> list:
    cases = []
    for p in (1.5, 2.0, 3.0):
        for q in (0.0, (p - 1) / 2, p - 1):
            src = {"type": "eigen"} if q == p - 1 else {"type": "power", "q": q}
            cases.append({"name": f"p{p:g}_q{q:g}", "p": p, "source": src})
    cases.append({"name": "affine_theta1", "p": 2.0, "exponent": "theta_concave", "theta": 1.0,
                  "source": {"type": "power", "q": 0.0, "a": {"affine": [1.0, 1.0, 1.0]}}})
    for om in (0.5, 1.0):
        cases.append({"name": f"hardy_henon_omega{om:g}", "p": 2.0, "exponent": "hardy_henon",
                      "omega": om,
                      "source": {"type": "power", "q": 0.0, "a": {"hardy_henon": {"omega": om}}}})
    cases.append({"name": "sum_powers_q0.5_r0.25", "p": 2.0,
                  "source": {"type": "sum_powers", "q": 0.5, "r": 0.25}})
    return cases


DEFAULTS = {
    "oracle_accuracy": (runners.run_oracle_accuracy, {
        "h_1d": 1 / 128, "torsion_1d": [[2.0, 1e-3], [3.0, 5e-3]],
        "h_disk": 1 / 64, "disk_tol": 5e-3, "max_seconds": 10.0}),
    "calibration": (runners.run_calibration, {"hs": [1 / 64, 1 / 128], "floor": 1e-9}),
    "exact_concavity_square": (runners.run_exact_concavity, {
        "name": "exact_concavity_square", "domain": "square", "hs": [1 / 64, 1 / 128],
        "refinement_ratio": 0.6, "cases": _exact_cases()}),
    "triangle_counterexample": (runners.run_triangle_counterexample, {
        "domain": "triangle", "p": 2.0, "hs": [1 / 64, 1 / 128], "factor": 10.0}),
    "perturbed_bound": (runners.run_perturbed_bound, {
        "domain": "rounded-square(1)", "h": 1 / 64, "k": 20.0,
        "eps": [0.0, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.9],
        "pq": [[2.0, 0.0], [2.0, 0.5], [3.0, 0.0], [3.0, 1.0]],
        "delta_h": [4, 8, 16], "scan_depth_h": 2, "min_slope": 0.9}),
    "comparison": (runners.run_comparison, {
        "domain": "square", "h": 1 / 64, "ps": [2.0, 3.0],
        "delta_a": [0.4, 0.2, 0.1, 0.05], "lebesgue_exponent": "inf"}),
    "p_limit": (runners.run_p_limit, {
        "domain": "rounded-square(1)", "h": 1 / 64, "ps": [4.0, 8.0, 16.0, 32.0],
        "eps": 0.25, "h_1d": 1 / 128, "tol_1d": 1e-3}),
    "q_to_eigen": (runners.run_q_to_eigen, {
        "domain": "square", "h": 1 / 64, "p": 2.0, "qs": [1.05, 1.1, 1.25, 1.5],
        "delta": 0.1, "eps": 0.25}),
    "singular": (runners.run_singular, {
        "domain": "square", "h": 1 / 64, "etas": [1e-3, 1e-2, 1e-1],
        "qp": [[-0.5, 2.0], [-0.5, 3.0], [-1.0, 2.0]]}),
    "sigma_log": (runners.run_sigma_log, {
        "domain": "square", "h": 1 / 64, "k": 5.0, "eps": [0.0, 0.1],
        "sigma_fraction": [0.1, 0.2], "delta_h": 4, "segment_samples": 32}),
    "fractional_p2": (runners.run_fractional_p2, {
        "s": [0.6, 0.8, 0.9, 0.95], "h_1d": 1 / 256, "h_2d": 1 / 32,
        "delta": 0.1, "max_spread": 0.5, "mid_slack": 0.05}),
    "uniqueness_comparison": (runners.run_uniqueness_comparison_suite, {
        "domain": "square", "h": 1 / 32, "seeds": [0, 1, 2, 3, 4],
        "specs": [{"name": "torsion_p2", "p": 2.0, "source": {"type": "power", "q": 0.0}},
                  {"name": "torsion_p3", "p": 3.0, "source": {"type": "power", "q": 0.0}},
                  {"name": "sublinear_p2_q0.5", "p": 2.0, "source": {"type": "power", "q": 0.5}},
                  {"name": "eigen_p2", "p": 2.0, "source": {"type": "eigen"}}],
        "unique_tol": 1e-6, "comparison_q": [0.0, 0.5],
        "ordered_weights": [1.0, {"affine": [1.0, 0.5, 0.5]}], "comparison_tol": 1e-8}),
}

NAMES = tuple(DEFAULTS)


class UnknownExperiment(KeyError):
    pass


def default_config(name: str) -> dict:
    if name not in DEFAULTS:
        raise UnknownExperiment(name)
    return copy.deepcopy(DEFAULTS[name][1])


def load_config(name: str, config_dir=None) -> dict:
    """Config from ``config_dir/<name>.json`` when present, else the built-in default."""
    cfg = default_config(name)
    if config_dir is not None:
        path = Path(config_dir) / f"{name}.json"
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                loaded = json.load(fh)
            unknown = sorted(set(loaded) - set(cfg))
            if unknown:
                raise ValueError(f"{path}: unknown key {unknown[0]!r}")
            cfg.update(loaded)
    return cfg


def run_experiment(name: str, config: dict | None = None) -> ExperimentResult:
    runner = DEFAULTS[name][0] if name in DEFAULTS else None
    if runner is None:
        raise UnknownExperiment(name)
    return runner(default_config(name) if config is None else config)


def _run_pair(args):
    return run_experiment(*args)


def run_many(names, configs: dict, workers: int = 1) -> list:
    """Run experiments, results in the order of ``names``."""
    jobs = [(n, configs.get(n)) for n in names]
    if workers <= 1 or len(jobs) <= 1:
        return [run_experiment(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_pair, jobs))
