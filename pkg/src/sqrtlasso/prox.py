"""l1 proximal machinery: soft-thresholding, the prox-gradient map, the
composite objective, its quadratic model and the approximate KKT residual."""

from __future__ import annotations

import math

import numpy as np

from .core import Problem
from .errors import UsageError
from .loss import LossKind, LossState, evaluate, gradient


def check_lambda(lam) -> float:
    lam = float(lam)
    if not (math.isfinite(lam) and lam > 0):
        raise UsageError(f"lambda must be finite and positive, got {lam}")
    return lam


def soft_threshold(x, t):
    """Coordinate-wise ``sign(x) * max(|x| - t, 0)``."""
    if t < 0:
        raise UsageError(f"threshold must be non-negative, got {t}")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def objective(problem: Problem, kind: LossKind, lam: float, theta) -> float:
    """``loss(theta) + lam * ||theta||_1``."""
    state = evaluate(problem, kind, theta)
    return state.loss_value + lam * float(np.abs(state.theta).sum())


def prox_grad_step(problem, kind, lam, theta, l, state=None, grad=None):
    """Closed-form minimizer of the ``l``-quadratic model around ``theta``.

    ``state`` and ``grad`` may be passed to reuse a previous evaluation.
    """
    if not l > 0:
        raise UsageError(f"step constant must be positive, got {l}")
    if grad is None:
        if state is None:
            state = evaluate(problem, kind, theta)
        grad = gradient(problem, kind, state)
    theta = np.asarray(theta, dtype=np.float64)
    return soft_threshold(theta - grad / l, lam / l)


def quadratic_model(problem, kind, lam, theta_new, theta_old, l, state=None, grad=None) -> float:
    """Majorizing model ``loss(old) + g^T step + l/2 ||step||^2 + lam ||new||_1``."""
    if state is None:
        state = evaluate(problem, kind, theta_old)
    if grad is None:
        grad = gradient(problem, kind, state)
    step = np.asarray(theta_new, dtype=np.float64) - state.theta
    return (
        state.loss_value
        + float(grad @ step)
        + 0.5 * l * float(step @ step)
        + lam * float(np.abs(theta_new).sum())
    )


def kkt_from_gradient(grad: np.ndarray, theta: np.ndarray, lam: float) -> float:
    """Minimum over subgradients ``g`` of ``||grad + lam * g||_inf``.

    The subdifferential of the l1 norm is a box, so the minimization splits
    by coordinate: on the support the subgradient is fixed at ``sign(theta_j)``,
    off it the best choice shrinks ``|grad_j|`` by ``lam``.
    """
    if grad.size == 0:
        return 0.0
    nz = theta != 0
    rho = np.where(
        nz,
        np.abs(grad + lam * np.sign(theta)),
        np.maximum(np.abs(grad) - lam, 0.0),
    )
    return float(rho.max())


def kkt_residual(problem, kind, lam, theta, state: LossState | None = None) -> float:
    if state is None:
        state = evaluate(problem, kind, theta)
    return kkt_from_gradient(gradient(problem, kind, state), state.theta, lam)
