"""Extensions built on the square-root Lasso solvers.

* calibrated multivariate regression (CMR): sum of per-task square-root
  losses with a row-wise l1/l2 penalty, solved by prox-gradient;
* node-wise sparse precision matrix estimation;
* the plug-in noise level estimate.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import DenseMatrix, Problem
from .errors import NonsmoothRegion, NonsmoothStop, UsageError, ZeroResponse
from .gd import GdConfig, SolveResult, Status, prox_gradient
from .pathwise import Algo, PathConfig, default_lambda, default_stages, lambda_grid, solve_path
from .prox import check_lambda

log = logging.getLogger(__name__)


def group_soft_threshold(row, t):
    """Prox of ``t * ||.||_2``: ``max(1 - t / ||row||, 0) * row``."""
    if t < 0:
        raise UsageError(f"threshold must be non-negative, got {t}")
    row = np.asarray(row, dtype=np.float64)
    norm = float(np.linalg.norm(row))
    if norm <= t:
        return np.zeros_like(row)
    return (1.0 - t / norm) * row


def group_soft_threshold_rows(mat, t):
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > t, 1.0 - t / norms, 0.0)
    return scale * mat


def estimate_sigma(problem: Problem, theta_hat) -> float:
    """Plug-in noise level ``||y - X theta_hat||_2 / sqrt(n)``."""
    return float(np.linalg.norm(problem.residual(np.asarray(theta_hat, dtype=np.float64))) / problem.sqrt_n)


# -- calibrated multivariate regression ------------------------------------


@dataclass(frozen=True)
class _CmrState:
    theta: np.ndarray
    residual: np.ndarray
    norms: np.ndarray
    value: float


class CmrComposite:
    """``(1/sqrt(n)) sum_k ||Y_k - X Theta_k||_2 + lam * sum_j ||Theta_j.||_2``."""

    def __init__(self, x: DenseMatrix, y_mat: np.ndarray):
        self.x = x
        self.y = y_mat
        self.sqrt_n = math.sqrt(x.rows)
        self.floors = 1e-8 * (np.linalg.norm(y_mat, axis=0) / self.sqrt_n + 1.0)
        self.offending_task = None

    def zeros(self):
        return np.zeros((self.x.cols, self.y.shape[1]))

    def evaluate(self, theta):
        r = self.y - self.x.array @ theta
        norms = np.linalg.norm(r, axis=0)
        scaled = norms / self.sqrt_n
        bad = np.flatnonzero(~(scaled >= self.floors))
        if bad.size:
            k = int(bad[0])
            self.offending_task = k
            raise NonsmoothRegion(float(scaled[k]), float(self.floors[k]))
        return _CmrState(theta, r, norms, float(norms.sum() / self.sqrt_n))

    @staticmethod
    def value(state):
        return state.value

    @staticmethod
    def residual_norm(state):
        return float(state.norms.min())

    def value_change(self, old, new, step):
        # per-task |r'| - |r| = <r' - r, r' + r> / (|r'| + |r|), free of cancellation
        inner = -np.einsum("ik,ik->k", self.x.array @ step, old.residual + new.residual)
        return float((inner / (old.norms + new.norms)).sum() / self.sqrt_n)

    def gradient(self, state):
        return -(self.x.array.T @ (state.residual / state.norms)) / self.sqrt_n

    @staticmethod
    def penalty(theta):
        return float(np.linalg.norm(theta, axis=1).sum())

    @staticmethod
    def prox(v, t):
        return group_soft_threshold_rows(v, t)

    @staticmethod
    def kkt(grad, theta, lam):
        row_norms = np.linalg.norm(theta, axis=1)
        nz = row_norms > 0
        out = np.maximum(np.linalg.norm(grad, axis=1) - lam, 0.0)
        if nz.any():
            unit = theta[nz] / row_norms[nz, None]
            out[nz] = np.linalg.norm(grad[nz] + lam * unit, axis=1)
        return float(out.max()) if out.size else 0.0

    @staticmethod
    def support_size(theta):
        return int(np.count_nonzero(np.linalg.norm(theta, axis=1)))


@dataclass
class CoefMatrix:
    theta_mat: np.ndarray
    lambdas: np.ndarray = None
    stage_results: list[SolveResult] = field(default_factory=list)

    @property
    def row_support(self) -> np.ndarray:
        return np.flatnonzero(np.linalg.norm(self.theta_mat, axis=1) > 0)

    @property
    def total_iterations(self) -> int:
        return sum(r.iterations for r in self.stage_results)


def cmr_lambda_zero(x: DenseMatrix, y_mat: np.ndarray) -> float:
    norms = np.linalg.norm(y_mat, axis=0)
    if np.any(norms == 0):
        raise ZeroResponse("a response column is identically zero")
    grad0 = (x.array.T @ (y_mat / norms)) / math.sqrt(x.rows)
    return float(np.linalg.norm(grad0, axis=1).max())


def solve_cmr(x, y_mat, lam=None, cfg: PathConfig | None = None) -> CoefMatrix:
    """Pathwise prox-gradient for calibrated multivariate regression.

    Parameters
    ----------
    x : DenseMatrix or array_like, shape (n, d)
    y_mat : array_like, shape (n, m)
    lam : float, optional
        Target regularization; defaults to ``sqrt(log d / n)``.
    cfg : PathConfig, optional
        Stage count, tolerances and eps rule.  Only ``Algo.GD`` is supported.

    Raises
    ------
    NonsmoothStop
        If some task's residual collapses; ``.task`` and ``.stage`` say where.
    """
    cfg = cfg or PathConfig()
    if cfg.algo is not Algo.GD:
        raise UsageError("CMR is solved by proximal gradient only")
    x = x if isinstance(x, DenseMatrix) else DenseMatrix(x)
    y_mat = np.asarray(y_mat, dtype=np.float64)
    if y_mat.ndim == 1:
        y_mat = y_mat[:, None]
    if y_mat.shape[0] != x.rows:
        raise UsageError(f"Y has {y_mat.shape[0]} rows but X has {x.rows}")
    if not np.all(np.isfinite(y_mat)):
        raise UsageError("Y has non-finite entries")
    target = check_lambda(lam if lam is not None else cfg.lambda_target or default_lambda(x.rows, x.cols))
    composite = CmrComposite(x, y_mat)
    lam0 = cmr_lambda_zero(x, y_mat)
    if target >= lam0:
        return CoefMatrix(composite.zeros(), np.array([lam0, target]), [])
    n_stages = cfg.n_stages or default_stages(lam0, target)
    lambdas = lambda_grid(lam0, target, n_stages)
    theta = composite.zeros()
    results = []
    for k in range(1, n_stages + 1):
        gcfg = GdConfig(lam=float(lambdas[k]), eps=cfg.stage_eps(lambdas, k), trace=cfg.trace,
                        keep_iterates=cfg.keep_iterates, **cfg.solver_options)
        res = prox_gradient(composite, gcfg, theta)
        if res.status is Status.NONSMOOTH_STOP:
            task = composite.offending_task
            raise NonsmoothStop(f"task {task} entered the nonsmooth region at stage {k}",
                                task=task, stage=k)
        results.append(res)
        theta = res.theta_hat
    return CoefMatrix(theta, lambdas, results)


# -- sparse precision matrix ------------------------------------------------


@dataclass
class PrecisionEstimate:
    omega: np.ndarray
    support: np.ndarray
    sigma_hat: np.ndarray
    failed_columns: list[int] = field(default_factory=list)

    @property
    def n_edges(self) -> int:
        return int(np.triu(self.support, 1).sum())

    def edge_list(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.support, 1))
        return list(zip(i.tolist(), j.tolist()))

    def sparsity(self) -> float:
        d = self.support.shape[0]
        return self.n_edges / (d * (d - 1) / 2)


def standardize_columns(data: np.ndarray):
    """Center columns and scale them to Euclidean norm ``sqrt(n)``."""
    centered = data - data.mean(axis=0)
    scale = np.linalg.norm(centered, axis=0) / math.sqrt(data.shape[0])
    if np.any(scale == 0):
        raise UsageError("constant column in data")
    return centered / scale, scale


def _regress_column(z, j, lam, cfg):
    d = z.shape[1]
    others = np.delete(np.arange(d), j)
    problem = Problem(z[:, others], z[:, j])
    res = solve_path(problem, cfg=replace(cfg, lambda_target=lam))
    if not res.completed:
        return j, None, None
    return j, res.theta_hat, estimate_sigma(problem, res.theta_hat)


def estimate_precision(data, lam=None, cfg: PathConfig | None = None, n_jobs: int = 1) -> PrecisionEstimate:
    """Node-wise square-root Lasso estimate of a sparse precision matrix.

    Column ``j`` of the standardized data is regressed on the others; with
    coefficients ``b`` and noise estimate ``s`` the column of the precision
    estimate is ``1/s**2`` on the diagonal and ``-b/s**2`` elsewhere.  The
    result is averaged with its transpose and mapped back to the original
    column scales.  An edge is kept only when both directed regressions
    select it.  Columns whose path stops in the nonsmooth region fall back to
    a diagonal-only row and column.
    """
    arr = data.array if isinstance(data, DenseMatrix) else np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise UsageError("data must be a 2-d array")
    n, d = arr.shape
    if n < 2 or d < 2:
        raise UsageError("precision estimation needs n >= 2 and d >= 2")
    cfg = cfg or PathConfig()
    lam = check_lambda(lam if lam is not None else cfg.lambda_target or default_lambda(n, d))
    z, scale = standardize_columns(arr)

    if n_jobs == 1:
        fits = [_regress_column(z, j, lam, cfg) for j in range(d)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            fits = list(pool.map(lambda j: _regress_column(z, j, lam, cfg), range(d)))

    omega = np.zeros((d, d))
    directed = np.zeros((d, d), dtype=bool)
    sigma_hat = np.ones(d)
    failed = []
    for j, coef, sig in fits:
        if coef is None:
            failed.append(j)
            omega[j, j] = 1.0
            continue
        others = np.delete(np.arange(d), j)
        inv_var = 1.0 / sig ** 2
        omega[j, j] = inv_var
        omega[others, j] = -coef * inv_var
        directed[others, j] = coef != 0
        sigma_hat[j] = sig
    for j in failed:
        log.warning("column %d: regression entered the nonsmooth region; diagonal fallback", j)
        keep = omega[j, j]
        omega[j, :] = 0.0
        omega[:, j] = 0.0
        directed[j, :] = False
        directed[:, j] = False
        omega[j, j] = keep
    omega = 0.5 * (omega + omega.T)
    omega = omega / np.outer(scale, scale)
    support = directed & directed.T
    np.fill_diagonal(support, True)
    return PrecisionEstimate(omega, support, sigma_hat * scale, failed)


def lambda_for_sparsity(data, target: float, cfg: PathConfig | None = None, n_jobs: int = 1,
                        tol: float = 0.2, max_iter: int = 30):
    """Bisect on ``log(lambda)`` until the edge density is within ``tol``
    (relative) of ``target``.  Returns ``(lambda, estimate)`` for the closest
    density found."""
    if not 0 < target < 1:
        raise UsageError("target sparsity must lie in (0, 1)")
    arr = data.array if isinstance(data, DenseMatrix) else np.asarray(data, dtype=np.float64)
    n, d = arr.shape
    z, _ = standardize_columns(arr)
    # above every column's null-fit threshold no edge survives
    hi = float(np.abs(z.T @ z).max() / n) * 1.01
    lo = hi * 1e-3
    best = None
    lo_log, hi_log = math.log(lo), math.log(hi)
    for _ in range(max_iter):
        mid = math.exp(0.5 * (lo_log + hi_log))
        est = estimate_precision(arr, mid, cfg, n_jobs)
        density = est.sparsity()
        if best is None or abs(density - target) < abs(best[1].sparsity() - target):
            best = (mid, est)
        if abs(density - target) <= tol * target:
            break
        if density > target:
            lo_log = math.log(mid)
        else:
            hi_log = math.log(mid)
    return best
