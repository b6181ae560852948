"""Greedy Gauss-Newton solvers for sparse solutions of underdetermined nonlinear systems."""

from .bench import GridResult, GridSpec, export_grid, read_grid, recovery_boundary, run_grid
from .greedy import (
    SolverConfig,
    Strategy,
    SupportSet,
    descent_direction,
    line_search,
    restart_vector,
    select_column_md,
    select_column_om,
    select_column_omf,
    solve,
)
from .l1 import LpStandardForm, LpStatus, l1_solve, l1_step, simplex_solve
from .numlin import InvalidInputError, min_norm_lstsq, pinv, residual_projection
from .problems import (
    DomainError,
    NonlinearSystem,
    check_jacobian,
    load_instance,
    make_exponential,
    make_quadratic,
    save_instance,
    small_problem,
)
from .report import SolveReport, TraceRow

__version__ = "0.1.0"

__all__ = [
    "DomainError", "GridResult", "GridSpec", "InvalidInputError", "LpStandardForm",
    "LpStatus", "NonlinearSystem", "SolveReport", "SolverConfig", "Strategy",
    "SupportSet", "TraceRow", "check_jacobian", "descent_direction", "export_grid",
    "l1_solve", "l1_step", "line_search", "load_instance", "make_exponential",
    "make_quadratic", "min_norm_lstsq", "pinv", "read_grid", "recovery_boundary",
    "residual_projection", "restart_vector", "run_grid", "save_instance",
    "select_column_md", "select_column_om", "select_column_omf", "simplex_solve",
    "small_problem", "solve",
]
