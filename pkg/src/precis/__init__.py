"""Graphical lasso solvers: GLASSO, P-GLASSO and DP-GLASSO."""

from .engines import (ENGINES, Criterion, FitResult, Instance, SolverOptions, Status,
                      WarmStart, dpglasso_fit, fit, glasso_fit, pglasso_fit)
from .errors import (DegenerateMatrix, DimensionTooSmall, MatrixFormatError,
                     NotPositiveDefinite, PrecisError, WarmStartInfeasible)
from .pathrun import PathResult, PathSpec, Policy, lambda_grid, run_path

__all__ = [
    "ENGINES", "Criterion", "FitResult", "Instance", "SolverOptions", "Status", "WarmStart",
    "dpglasso_fit", "fit", "glasso_fit", "pglasso_fit",
    "DegenerateMatrix", "DimensionTooSmall", "MatrixFormatError", "NotPositiveDefinite",
    "PrecisError", "WarmStartInfeasible",
    "PathResult", "PathSpec", "Policy", "lambda_grid", "run_path",
]
