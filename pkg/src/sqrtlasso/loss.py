"""Smooth losses: the square-root loss and the least-squares baseline.

The square-root loss ``||y - X theta||_2 / sqrt(n)`` is differentiable
everywhere except on the interpolation set ``{theta : X theta = y}``.  Every
operation here checks ``||r||_2 / sqrt(n) >= problem.smooth_floor`` and raises
:class:`~sqrtlasso.errors.NonsmoothRegion` otherwise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import Problem
from .errors import NonsmoothRegion, UsageError


class LossKind(enum.Enum):
    SQRT_L2 = "sqrt"
    LEAST_SQUARES = "ls"


@dataclass(frozen=True)
class LossState:
    """Loss value and residual at one point ``theta``."""

    theta: np.ndarray
    residual: np.ndarray
    residual_norm: float
    loss_value: float


def _check_smooth(problem: Problem, residual_norm: float) -> None:
    scaled = residual_norm / problem.sqrt_n
    if not scaled >= problem.smooth_floor:
        raise NonsmoothRegion(scaled, problem.smooth_floor)


def state_from_residual(problem: Problem, kind: LossKind, theta, residual) -> LossState:
    rn = float(np.linalg.norm(residual))
    if kind is LossKind.SQRT_L2:
        _check_smooth(problem, rn)
        value = rn / problem.sqrt_n
    else:
        value = rn * rn / problem.n
    return LossState(theta=theta, residual=residual, residual_norm=rn, loss_value=value)


def evaluate(problem: Problem, kind: LossKind, theta) -> LossState:
    """Evaluate the loss at ``theta``.

    Raises
    ------
    NonsmoothRegion
        For the square-root loss when the residual is below the smooth floor.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (problem.d,):
        raise UsageError(f"theta must have length {problem.d}, got shape {theta.shape}")
    return state_from_residual(problem, kind, theta, problem.residual(theta))


def gradient(problem: Problem, kind: LossKind, state: LossState) -> np.ndarray:
    xtr = problem.x.array.T @ state.residual
    if kind is LossKind.SQRT_L2:
        _check_smooth(problem, state.residual_norm)
        return xtr * (-1.0 / (problem.sqrt_n * state.residual_norm))
    return xtr * (-2.0 / problem.n)


def hessian_diag_and_deflation(problem: Problem, state: LossState):
    """Factor the square-root-loss Hessian as ``c * (X^T X - w w^T)``.

    Returns
    -------
    diag : ndarray, shape (d,)
        Hessian diagonal ``c * (||X_j||^2 - w_j^2)``.
    w : ndarray, shape (d,)
        ``X^T u`` with ``u`` the unit residual direction.
    c : float
        ``1 / (sqrt(n) * ||r||_2)``.
    """
    _check_smooth(problem, state.residual_norm)
    rn = state.residual_norm
    c = 1.0 / (problem.sqrt_n * rn)
    w = problem.x.array.T @ (state.residual / rn)
    # w_j^2 <= ||X_j||^2 by Cauchy-Schwarz; clip rounding
    diag = c * np.maximum(problem.x.col_sq_norms - w * w, 0.0)
    return diag, w, c


def hessian_apply(problem: Problem, kind: LossKind, state: LossState, v) -> np.ndarray:
    """Hessian-vector product without forming the Hessian."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (problem.d,):
        raise UsageError(f"v must have length {problem.d}, got shape {v.shape}")
    xa = problem.x.array
    z = xa @ v
    if kind is LossKind.LEAST_SQUARES:
        return (xa.T @ z) * (2.0 / problem.n)
    _check_smooth(problem, state.residual_norm)
    rn = state.residual_norm
    c = 1.0 / (problem.sqrt_n * rn)
    u = state.residual / rn
    # X^T (I - u u^T) X v
    return c * (xa.T @ (z - u * float(u @ z)))
