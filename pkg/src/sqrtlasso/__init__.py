"""Fast proximal solvers for the square-root Lasso and its extensions."""

__version__ = "0.1.0"

from .core import DenseMatrix, Problem, mat_t_vec, mat_vec
from .errors import NonsmoothRegion, NonsmoothStop, SqrtLassoError, UsageError, ZeroResponse
from .gd import GdConfig, SolveResult, Status, TraceRecord, solve_gd
from .loss import LossKind, LossState, evaluate, gradient, hessian_apply, hessian_diag_and_deflation
from .newton import NewtonConfig, solve_newton, solve_subproblem
from .pathwise import Algo, EpsRule, PathConfig, PathResult, lambda_grid, lambda_zero, solve_path
from .prox import kkt_residual, objective, prox_grad_step, quadratic_model, soft_threshold

__all__ = [
    "Algo", "DenseMatrix", "EpsRule", "GdConfig", "LossKind", "LossState", "NewtonConfig",
    "NonsmoothRegion", "NonsmoothStop", "PathConfig", "PathResult", "Problem", "SolveResult",
    "SqrtLassoError", "Status", "TraceRecord", "UsageError", "ZeroResponse", "evaluate",
    "gradient", "hessian_apply", "hessian_diag_and_deflation", "kkt_residual", "lambda_grid",
    "lambda_zero", "mat_t_vec", "mat_vec", "objective", "prox_grad_step", "quadratic_model",
    "soft_threshold", "solve_gd", "solve_newton", "solve_path", "solve_subproblem",
]
