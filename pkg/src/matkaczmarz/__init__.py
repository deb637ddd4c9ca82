"""Greedy randomized Kaczmarz solvers with momentum for ``A X B = C``.

Submodules
----------
linalg    dense kernels, Jacobi SVD, pseudoinverse solution, matrix CSV files
problems  seeded instance generators
solver    ME-RGRK, heavy-ball and Nesterov variants
theory    spectral constants, rate factors and error bounds
bspline   clamped B-spline bases
surface   tensor-product surface fitting
cli       command-line front end (``python -m matkaczmarz``)
"""

from .exceptions import (
    DivergenceError,
    InstanceError,
    InvariantError,
    ResidualDriftError,
    SVDConvergenceError,
)
from .linalg import pinv_solution, svd
from .problems import ProblemInstance, RngSpec, generate
from .solver import ConvergenceReport, Method, Sampling, SolverConfig, solve, solve_stack
from .theory import error_bound_curve, rate_factors, spectral_bounds

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport",
    "DivergenceError",
    "InstanceError",
    "InvariantError",
    "Method",
    "ProblemInstance",
    "ResidualDriftError",
    "RngSpec",
    "SVDConvergenceError",
    "Sampling",
    "SolverConfig",
    "error_bound_curve",
    "generate",
    "pinv_solution",
    "rate_factors",
    "solve",
    "solve_stack",
    "spectral_bounds",
    "svd",
]
