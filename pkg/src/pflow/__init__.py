"""Finite-difference solver and property-check harness for the p-Laplacian-type flow

    |Du|^(p-2) u_t = div(|Du|^(p-2) Du),

marched in its regularized non-divergence form ``u_t = a_ij(Du) u_ij``.
"""
from ._kernels import BACKEND
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    InstabilityError,
    PflowError,
    PreconditionError,
    StencilError,
)
from .grid import Grid, ScalarField, read_snapshot, resample, write_snapshot
from .operator import PdeParams, apply_operator, cfl_dt, coefficient_matrix
from .solver import ProblemSpec, RunResult, SolverConfig, solve, solve_to_steady, step_explicit

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "Grid",
    "InstabilityError",
    "PdeParams",
    "PflowError",
    "PreconditionError",
    "ProblemSpec",
    "RunResult",
    "ScalarField",
    "SolverConfig",
    "StencilError",
    "apply_operator",
    "cfl_dt",
    "coefficient_matrix",
    "read_snapshot",
    "resample",
    "solve",
    "solve_to_steady",
    "step_explicit",
    "write_snapshot",
]
