"""Proximal Newton for the square-root Lasso.

The l1-regularized quadratic subproblem is solved by cyclic coordinate
descent with an active set.  The Hessian ``c * (X^T X - w w^T)`` is never
formed: the solver tracks ``z = X delta`` and ``s = w^T delta`` so that one
coordinate update costs O(n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Problem
from .errors import NonsmoothRegion, UsageError
from .gd import SolveResult, Status, TraceRecord
from .loss import LossKind, LossState, evaluate, gradient, hessian_diag_and_deflation
from .prox import check_lambda, kkt_from_gradient

REFRESH_EVERY = 1000
DEGENERATE_REL = 1e-12
RIDGE_REL = 1e-10


@dataclass
class NewtonConfig:
    lam: float
    eps: float = 1e-6
    max_outer: int = 100
    mu: float = 0.9
    alpha: float = 0.25
    sub_tol: float | None = None
    max_sweeps: int = 10000
    max_backtracks: int = 100
    trace: bool = False
    keep_iterates: bool = False

    def __post_init__(self):
        self.lam = check_lambda(self.lam)
        if not self.eps > 0:
            raise UsageError(f"eps must be positive, got {self.eps}")
        if not 0 < self.mu < 1:
            raise UsageError("mu must lie in (0, 1)")
        if not 0 < self.alpha < 0.5:
            raise UsageError("alpha must lie in (0, 0.5)")
        if self.sub_tol is None:
            self.sub_tol = min(1e-8, 0.1 * self.eps)
        if not self.sub_tol > 0:
            raise UsageError("sub_tol must be positive")
        if self.max_outer < 1 or self.max_sweeps < 1 or self.max_backtracks < 0:
            raise UsageError("iteration caps must be positive")


@dataclass
class SubproblemState:
    """Running products of the coordinate-descent inner loop."""

    d_vec: np.ndarray
    z: np.ndarray
    s: float
    active_set: set


def _cd_subproblem(problem, lam, state, grad, sub_tol, max_sweeps):
    xa = problem.x.array
    colsq = problem.x.col_sq_norms
    diag, w, c = hessian_diag_and_deflation(problem, state)
    ridge = np.where(diag <= DEGENERATE_REL * c * colsq, RIDGE_REL * c * colsq, 0.0)
    h = diag + ridge
    theta_t = state.theta
    theta = theta_t.copy()
    sub = SubproblemState(np.zeros(problem.d), np.zeros(problem.n), 0.0, set())
    counter = 0

    def refresh():
        sub.d_vec = theta - theta_t
        sub.z = xa @ sub.d_vec
        sub.s = float(w @ sub.d_vec)

    def sweep(coords):
        nonlocal counter
        biggest = 0.0
        z = sub.z
        for j in coords:
            hj = h[j]
            if hj <= 0.0:
                # zero column: the penalty alone pins the coordinate at 0
                if theta[j] != 0.0:
                    theta[j] = 0.0
                    refresh()
                    z = sub.z
                continue
            col = xa[:, j]
            old = theta[j]
            gj = grad[j] + c * (float(col @ z) - w[j] * sub.s) + ridge[j] * (old - theta_t[j])
            v = old - gj / hj
            t = lam / hj
            new = v - t if v > t else (v + t if v < -t else 0.0)
            if new != old:
                step = new - old
                theta[j] = new
                z += step * col
                sub.s += w[j] * step
                biggest = max(biggest, hj * abs(step))
                counter += 1
                if counter % REFRESH_EVERY == 0:
                    refresh()
                    z = sub.z
        return biggest

    def violations():
        refresh()
        g_sub = grad + c * (xa.T @ sub.z - w * sub.s) + ridge * sub.d_vec
        nz = theta != 0
        return np.where(nz, np.abs(g_sub + lam * np.sign(theta)),
                        np.maximum(np.abs(g_sub) - lam, 0.0))

    all_coords = range(problem.d)
    sweep(all_coords)
    sweeps = 1
    while True:
        rho = violations()
        viol = rho > sub_tol
        if not viol.any() or sweeps >= max_sweeps:
            break
        sub.active_set = set(np.flatnonzero(theta != 0).tolist()) | set(np.flatnonzero(viol).tolist())
        coords = sorted(sub.active_set)
        while sweeps < max_sweeps:
            biggest = sweep(coords)
            sweeps += 1
            if biggest <= sub_tol:
                break
    return theta, sweeps


def solve_subproblem(problem: Problem, lam: float, state: LossState, sub_tol: float = 1e-8,
                     max_sweeps: int = 10000, grad=None) -> np.ndarray:
    """Approximately minimize the l1-regularized second-order model at ``state.theta``.

    The model is ``g^T (theta - theta_t) + 1/2 ||theta - theta_t||_H^2 + lam ||theta||_1``
    with ``g`` and ``H`` the square-root-loss gradient and Hessian at
    ``theta_t``.  Returns a point whose subproblem KKT residual is at most
    ``sub_tol`` unless ``max_sweeps`` runs out first.
    """
    if grad is None:
        grad = gradient(problem, LossKind.SQRT_L2, state)
    theta, _ = _cd_subproblem(problem, check_lambda(lam), state, grad, sub_tol, max_sweeps)
    return theta


def solve_newton(problem: Problem, cfg: NewtonConfig, theta0=None) -> SolveResult:
    """Minimize the square-root Lasso objective by proximal Newton.

    Each outer iteration solves the second-order subproblem, then
    backtracks ``eta = mu**q`` (q = 0, 1, ...) until the Armijo condition
    ``F(theta + eta*dtheta) <= F(theta) + alpha*eta*gamma`` holds, where
    ``gamma = g^T dtheta + lam*(||theta_half||_1 - ||theta||_1)``.

    The Hessian has zero curvature along any ``dtheta`` with ``X dtheta``
    parallel to the residual.  With ``n < d`` and a start far from the
    solution (``theta = 0`` at a small ``lam``) the subproblem can then be
    unbounded below and each inner solve runs to ``max_sweeps``; start from a
    nearby point or use :func:`sqrtlasso.pathwise.solve_path`.
    """
    lam = cfg.lam
    kind = LossKind.SQRT_L2
    if theta0 is None:
        theta = np.zeros(problem.d)
    else:
        theta = np.array(theta0, dtype=np.float64)
        if theta.shape != (problem.d,):
            raise UsageError(f"theta0 must have length {problem.d}")
    trace = [] if cfg.trace else None
    iterates = [] if cfg.keep_iterates else None

    try:
        state = evaluate(problem, kind, theta)
        grad = gradient(problem, kind, state)
    except NonsmoothRegion:
        return SolveResult(theta, math.nan, math.nan, 0, Status.NONSMOOTH_STOP,
                           trace=trace, iterates=iterates)
    obj = state.loss_value + lam * float(np.abs(theta).sum())
    omega = kkt_from_gradient(grad, theta, lam)
    total_sweeps = 0

    def record(t, eta=None, gamma=None):
        if trace is not None:
            trace.append(TraceRecord(t, obj, omega, state.residual_norm,
                                     int(np.count_nonzero(theta)), eta=eta, gamma=gamma))
        if iterates is not None:
            iterates.append(theta.copy())

    def finish(t, status):
        return SolveResult(theta, omega, obj, t, status, state.residual_norm,
                           trace=trace, iterates=iterates, inner_sweeps=total_sweeps)

    record(0)
    if omega <= cfg.eps:
        return finish(0, Status.CONVERGED)

    for t in range(1, cfg.max_outer + 1):
        try:
            theta_half, sweeps = _cd_subproblem(problem, lam, state, grad, cfg.sub_tol, cfg.max_sweeps)
        except NonsmoothRegion:
            return finish(t - 1, Status.NONSMOOTH_STOP)
        total_sweeps += sweeps
        dtheta = theta_half - theta
        l1_old = float(np.abs(theta).sum())
        gamma = float(grad @ dtheta) + lam * (float(np.abs(theta_half).sum()) - l1_old)
        # rounding slack so a converged step is not rejected on noise
        slack = 4 * np.finfo(float).eps * abs(obj)
        accepted = None
        for q in range(cfg.max_backtracks + 1):
            eta = cfg.mu ** q
            cand = theta + eta * dtheta
            try:
                cst = evaluate(problem, kind, cand)
            except NonsmoothRegion:
                continue
            f_cand = cst.loss_value + lam * float(np.abs(cand).sum())
            if f_cand <= obj + cfg.alpha * eta * gamma + slack:
                accepted = (cand, cst, f_cand, eta)
                break
        if accepted is None:
            return finish(t - 1, Status.LINE_SEARCH_FAIL)
        theta, state, obj, eta = accepted
        try:
            grad = gradient(problem, kind, state)
        except NonsmoothRegion:
            return finish(t, Status.NONSMOOTH_STOP)
        omega = kkt_from_gradient(grad, theta, lam)
        record(t, eta=eta, gamma=gamma)
        if omega <= cfg.eps:
            return finish(t, Status.CONVERGED)
    return finish(cfg.max_outer, Status.MAX_ITER)
