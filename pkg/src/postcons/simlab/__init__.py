"""Simulation harness: configuration, replications, oracle and reports."""

from .config import ExperimentConfig, config_from_dict, load_config
from .experiment import DecayFit, ExperimentResult, Trajectory, decay_fit, run_experiment
from .factory import Scenario, build_scenario, certificate_bound
from .oracle import brute_force_posterior_expectation, check_instance, random_instance
from .report import emit_report, read_csv, write_csv

__all__ = [
    "DecayFit",
    "ExperimentConfig",
    "ExperimentResult",
    "Scenario",
    "Trajectory",
    "brute_force_posterior_expectation",
    "build_scenario",
    "certificate_bound",
    "check_instance",
    "config_from_dict",
    "decay_fit",
    "emit_report",
    "load_config",
    "random_instance",
    "read_csv",
    "run_experiment",
    "write_csv",
]
