"""Monte Carlo lab: simulated panels and experiments on the limit theory."""

from .experiments import (
    EXPERIMENTS,
    ArbitrationCase,
    ExperimentResult,
    arbitration_experiment,
    clt_experiment,
    coverage_experiment,
    default_arbitration_cases,
    representation_check,
)
from .process import ProcessModel, simulate_panel

__all__ = [
    "EXPERIMENTS",
    "ArbitrationCase",
    "ExperimentResult",
    "ProcessModel",
    "arbitration_experiment",
    "clt_experiment",
    "coverage_experiment",
    "default_arbitration_cases",
    "representation_check",
    "simulate_panel",
]
