"""Configured numerical experiments and their oracles."""

from .core import (CaseResult, ExperimentCase, ExperimentResult, PerturbedBoundInputs,
                   fit_loglog_slope)
from .oracles import calibration_fields, oracle_torsion_1d, oracle_torsion_ball
from .registry import (DEFAULTS, NAMES, UnknownExperiment, default_config, load_config,
                       run_experiment, run_many)
from .runners import (calibrate_kappa, run_calibration, run_comparison, run_exact_concavity,
                      run_fractional_p2, run_oracle_accuracy, run_p_limit, run_perturbed_bound,
                      run_q_to_eigen, run_sigma_log, run_singular, run_triangle_counterexample,
                      run_uniqueness_comparison_suite)

__all__ = [
    "CaseResult", "ExperimentCase", "ExperimentResult", "PerturbedBoundInputs", "fit_loglog_slope",
    "calibration_fields", "oracle_torsion_1d", "oracle_torsion_ball", "DEFAULTS", "NAMES",
    "UnknownExperiment", "default_config", "load_config", "run_experiment", "run_many",
    "calibrate_kappa", "run_calibration", "run_comparison", "run_exact_concavity",
    "run_fractional_p2", "run_oracle_accuracy", "run_p_limit", "run_perturbed_bound",
    "run_q_to_eigen", "run_sigma_log", "run_singular", "run_triangle_counterexample",
    "run_uniqueness_comparison_suite",
]
