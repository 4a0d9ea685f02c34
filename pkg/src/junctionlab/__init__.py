"""Segregated harmonic maps into the N-pod: solver, frequency diagnostics, blow-ups, epiperimetric checks,
and spherical min-max partitions."""
from ._validation import DegenerateHeightError, InvalidTargetError, ResolutionError
from .core import (GridSpec, HomogeneousTrace, SegregatedField, YProfile, free_interface, make_Y,
                   make_linearized_mode, project_sigma, sigma_distance, trace_of_Y)
from .solver import SegregatedDirichletMinimizer, SolveReport, SolverConfig, SolverError, minimize

__version__ = "0.1.0"

__all__ = [
    "DegenerateHeightError", "InvalidTargetError", "ResolutionError",
    "GridSpec", "HomogeneousTrace", "SegregatedField", "YProfile", "free_interface", "make_Y",
    "make_linearized_mode", "project_sigma", "sigma_distance", "trace_of_Y",
    "SegregatedDirichletMinimizer", "SolveReport", "SolverConfig", "SolverError", "minimize",
]
