"""Multi-term Caputo fractional initial value problems.

Classify a problem, reformulate it as a weakly singular Volterra equation,
certify local existence, solve on graded grids and diagnose the regularity
of the solution at the origin.
"""

from .core import Grid, GridFunction, caputo_derivative, gamma, graded_grid, rl_integral
from .errors import (
    ConvergenceError,
    CorpusIntegrityError,
    DomainError,
    FracError,
    HypothesisError,
    ParseError,
    ProblemFileError,
    UnsupportedCaseError,
)
from .existence import certify, existence_interval
from .expr import parse
from .problem import ProblemSpec, check_hypotheses, classify, reformulate, residual
from .smoothness import smoothness_report
from .solver import SolverConfig, picard_solve, solve_ivp, step_solve

__version__ = "0.1.0"

__all__ = [
    "Grid", "GridFunction", "caputo_derivative", "gamma", "graded_grid", "rl_integral",
    "ConvergenceError", "CorpusIntegrityError", "DomainError", "FracError",
    "HypothesisError", "ParseError", "ProblemFileError", "UnsupportedCaseError",
    "certify", "existence_interval", "parse",
    "ProblemSpec", "check_hypotheses", "classify", "reformulate", "residual",
    "smoothness_report", "SolverConfig", "picard_solve", "solve_ivp", "step_solve",
]
