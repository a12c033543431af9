"""Pathwise optimization over a geometric regularization grid with warm starts."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Problem
from .errors import UsageError, ZeroResponse
from .gd import GdConfig, SolveResult, Status, solve_gd
from .loss import LossKind
from .newton import NewtonConfig, solve_newton

MAX_DEFAULT_STAGES = 200


class Algo(enum.Enum):
    GD = "gd"
    NEWTON = "newton"


class EpsRule(enum.Enum):
    QUARTER_LAMBDA = "quarter-lambda"
    FINAL_EPS = "final-eps"


def default_lambda(n: int, d: int) -> float:
    """Noise-free target ``sqrt(log d / n)``."""
    if d < 2:
        raise UsageError("default lambda sqrt(log d / n) needs d >= 2")
    return math.sqrt(math.log(d) / n)


def lambda_zero(problem: Problem, kind: LossKind = LossKind.SQRT_L2) -> float:
    """Smallest lambda for which the null fit ``theta = 0`` is optimal."""
    if problem.y_norm == 0:
        raise ZeroResponse("response vector is identically zero")
    xty = problem.x.array.T @ problem.y
    if kind is LossKind.SQRT_L2:
        # same floating-point expression as the gradient, so omega(0) is exactly 0
        return float(np.abs(xty * (-1.0 / (problem.sqrt_n * problem.y_norm))).max())
    return float(np.abs(xty * (-2.0 / problem.n)).max())


def lambda_grid(lambda0: float, lambda_target: float, n: int) -> np.ndarray:
    """Geometric grid ``lambda0 * ratio**K`` for ``K = 0..n`` ending at ``lambda_target``."""
    if n < 1:
        raise UsageError("number of stages must be >= 1")
    if not 0 < lambda_target < lambda0:
        raise UsageError(f"need 0 < lambda_target < lambda0, got {lambda_target}, {lambda0}")
    ratio = (lambda_target / lambda0) ** (1.0 / n)
    grid = lambda0 * ratio ** np.arange(n + 1)
    grid[-1] = lambda_target
    return grid


def default_stages(lambda0: float, lambda_target: float) -> int:
    # ratio >= 0.9 between consecutive stages
    n = math.ceil(math.log(lambda0 / lambda_target) / math.log(10 / 9))
    return int(min(max(n, 1), MAX_DEFAULT_STAGES))


@dataclass
class PathConfig:
    """Pathwise settings.

    ``n_stages=None`` picks the smallest count with stage ratio >= 0.9;
    ``lambda_target=None`` uses ``sqrt(log d / n)``.  ``solver_options`` are
    forwarded to :class:`GdConfig` or :class:`NewtonConfig`.
    """

    n_stages: int | None = None
    lambda_target: float | None = None
    eps_final: float = 1e-6
    algo: Algo = Algo.GD
    eps_rule: EpsRule = EpsRule.QUARTER_LAMBDA
    trace: bool = False
    keep_iterates: bool = False
    solver_options: dict = field(default_factory=dict)

    def __post_init__(self):
        self.algo = Algo(self.algo)
        self.eps_rule = EpsRule(self.eps_rule)
        if self.n_stages is not None and self.n_stages < 1:
            raise UsageError("n_stages must be >= 1")
        if self.lambda_target is not None and not self.lambda_target > 0:
            raise UsageError("lambda_target must be positive")
        if not self.eps_final > 0:
            raise UsageError("eps_final must be positive")

    def stage_eps(self, lambdas, k: int) -> float:
        if k == len(lambdas) - 1 or self.eps_rule is EpsRule.FINAL_EPS:
            return self.eps_final
        return max(lambdas[k] / 4, self.eps_final)


@dataclass
class PathResult:
    lambdas: np.ndarray
    stage_results: list[SolveResult]
    eta_lambda: float
    minimal_mse: float
    total_inner_iterations: int
    theta_hat: np.ndarray
    status: Status = Status.CONVERGED
    failed_stage: int | None = None
    stage_mse: list[float] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.failed_stage is None


def run_stage(problem, kind, algo, lam, eps, theta0, cfg: PathConfig) -> SolveResult:
    opts = dict(cfg.solver_options)
    if algo is Algo.NEWTON:
        if kind is not LossKind.SQRT_L2:
            raise UsageError("proximal Newton is implemented for the square-root loss only")
        scfg = NewtonConfig(lam=lam, eps=eps, trace=cfg.trace, keep_iterates=cfg.keep_iterates, **opts)
        return solve_newton(problem, scfg, theta0)
    scfg = GdConfig(lam=lam, eps=eps, trace=cfg.trace, keep_iterates=cfg.keep_iterates, **opts)
    return solve_gd(problem, kind, scfg, theta0)


def solve_path(problem: Problem, kind: LossKind = LossKind.SQRT_L2, cfg: PathConfig | None = None) -> PathResult:
    """Solve a decreasing lambda sequence, warm-starting each stage.

    Stage 0 is the null fit at ``lambda_zero``.  Intermediate stages use the
    tolerance given by ``cfg.eps_rule``; the final one uses ``eps_final``.
    A stage that stops in the nonsmooth region (or fails its line search)
    ends the path: the result then holds the stages completed before it and
    ``failed_stage`` names the failing index.
    """
    cfg = cfg or PathConfig()
    lam0 = lambda_zero(problem, kind)
    target = cfg.lambda_target
    if target is None:
        target = default_lambda(problem.n, problem.d)
    if target >= lam0:
        # the null fit already solves the target problem
        res = run_stage(problem, kind, cfg.algo, target, cfg.eps_final, np.zeros(problem.d), cfg)
        mse = [res.residual_norm ** 2 / problem.n]
        return PathResult(np.array([lam0, target]), [res], target / lam0, mse[0], res.iterations,
                          res.theta_hat, status=res.status, stage_mse=mse)
    n_stages = cfg.n_stages or default_stages(lam0, target)
    lambdas = lambda_grid(lam0, target, n_stages)
    eta = (target / lam0) ** (1.0 / n_stages)

    theta = np.zeros(problem.d)
    results: list[SolveResult] = []
    mses: list[float] = []
    for k in range(1, n_stages + 1):
        res = run_stage(problem, kind, cfg.algo, float(lambdas[k]), cfg.stage_eps(lambdas, k), theta, cfg)
        if res.status in (Status.NONSMOOTH_STOP, Status.LINE_SEARCH_FAIL):
            return _partial(lambdas, results, mses, eta, res.status, k, res, theta)
        results.append(res)
        mses.append(res.residual_norm ** 2 / problem.n)
        theta = res.theta_hat
    status = results[-1].status
    return PathResult(lambdas, results, eta, min(mses), sum(r.iterations for r in results),
                      theta, status=status, stage_mse=mses)


def _partial(lambdas, results, mses, eta, status, k, failed, theta):
    total = sum(r.iterations for r in results) + failed.iterations
    return PathResult(lambdas, results, eta, min(mses) if mses else math.nan, total,
                      theta, status=status, failed_stage=k, stage_mse=mses)
