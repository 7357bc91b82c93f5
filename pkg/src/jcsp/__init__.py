"""Layered queueing models of edge systems with item caches: analytic
solution, simulation, and placement plus cache-allocation search."""
from .metrics import ComparisonReport, ValidationReport, compute_gain, compute_mape
from .model import LqnModel, ModelBuilder, load_model, read_model, validate_model
from .report import emit_report
from .sim import SimOptions, simulate
from .solver import SolverOptions, solve_lqn, total_response_time

__version__ = "0.1.0"

__all__ = [
    "ComparisonReport",
    "LqnModel",
    "ModelBuilder",
    "SimOptions",
    "SolverOptions",
    "ValidationReport",
    "compute_gain",
    "compute_mape",
    "emit_report",
    "load_model",
    "read_model",
    "simulate",
    "solve_lqn",
    "total_response_time",
    "validate_model",
]
