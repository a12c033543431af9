"""Synthetic data: equicorrelated Gaussian designs, sparse truth, Gaussian noise.

Random streams
--------------
All draws use numpy's PCG64 generator.  Each purpose gets its own substream
seeded by ``SeedSequence([seed, purpose])`` with ``purpose`` one of the
``STREAM_*`` codes below (multitask noise for task ``k`` uses
``STREAM_TASK_NOISE + k``).  Normals come from ``Generator.standard_normal``
(numpy's ziggurat sampler).  Outputs are bit-identical for a fixed seed
within one numpy version.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DenseMatrix
from .errors import UsageError

STREAM_DESIGN = 0
STREAM_NOISE = 1
STREAM_CHAIN = 2
STREAM_TASK_NOISE = 100

DEFAULT_SUPPORT = (0, 1, 3)
DEFAULT_VALUES = (3.0, -2.0, 1.5)


def rng_for(seed: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1), purpose])))


@dataclass(frozen=True)
class GenSpec:
    """Synthetic regression settings; the defaults give the benchmark instance
    (n=200, d=2000, theta_1=3, theta_2=-2, theta_4=1.5, pairwise correlation 0.5).

    ``theta_values`` optionally maps 0-based indices to coefficients and
    overrides ``s_star``.
    """

    n: int = 200
    d: int = 2000
    s_star: int = 3
    sigma: float = 0.5
    rho: float = 0.5
    seed: int = 0
    theta_values: dict | None = None

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise UsageError("n and d must be positive")
        if not 0 <= self.s_star <= self.d:
            raise UsageError("need 0 <= s_star <= d")
        if not self.sigma >= 0:
            raise UsageError("sigma must be non-negative")
        if not 0 <= self.rho < 1:
            raise UsageError("rho must lie in [0, 1)")
        if self.theta_values is not None:
            for j in self.theta_values:
                if not 0 <= int(j) < self.d:
                    raise UsageError(f"theta index {j} out of range")

    def theta_star(self) -> np.ndarray:
        theta = np.zeros(self.d)
        if self.theta_values is not None:
            for j, v in self.theta_values.items():
                theta[int(j)] = v
            return theta
        # benchmark pattern first, then fill remaining indices in order
        order = [j for j in DEFAULT_SUPPORT if j < self.d]
        order += [j for j in range(self.d) if j not in order]
        for k, j in enumerate(order[: self.s_star]):
            theta[j] = DEFAULT_VALUES[k % len(DEFAULT_VALUES)]
        return theta


def equicorrelated_design(n: int, d: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Rows i.i.d. ``N(0, (1 - rho) I + rho 11^T)`` via one shared factor per row."""
    z = rng.standard_normal((n, d))
    g = rng.standard_normal((n, 1))
    return math.sqrt(1 - rho) * z + math.sqrt(rho) * g


def generate(spec: GenSpec):
    """Draw ``(X, y, theta_star)`` with ``y = X theta_star + sigma * noise``."""
    x = equicorrelated_design(spec.n, spec.d, spec.rho, rng_for(spec.seed, STREAM_DESIGN))
    theta = spec.theta_star()
    y = x @ theta
    if spec.sigma > 0:
        y = y + spec.sigma * rng_for(spec.seed, STREAM_NOISE).standard_normal(spec.n)
    return DenseMatrix(x), y, theta


def generate_multitask(spec: GenSpec, sigmas, theta_rows=None):
    """Multi-response data sharing one design and one row support.

    Each task uses the single-task coefficient pattern of ``spec`` unless
    ``theta_rows`` (shape ``(d, m)``) is given; task ``k`` gets noise level
    ``sigmas[k]``.
    """
    sigmas = np.asarray(sigmas, dtype=np.float64)
    m = sigmas.shape[0]
    x = equicorrelated_design(spec.n, spec.d, spec.rho, rng_for(spec.seed, STREAM_DESIGN))
    if theta_rows is None:
        theta_mat = np.repeat(spec.theta_star()[:, None], m, axis=1)
    else:
        theta_mat = np.asarray(theta_rows, dtype=np.float64)
        if theta_mat.shape != (spec.d, m):
            raise UsageError(f"theta_rows must have shape {(spec.d, m)}")
    y = x @ theta_mat
    for k in range(m):
        if sigmas[k] > 0:
            y[:, k] += sigmas[k] * rng_for(spec.seed, STREAM_TASK_NOISE + k).standard_normal(spec.n)
    return DenseMatrix(x), y, theta_mat


def chain_precision(d: int, rho: float) -> np.ndarray:
    omega = np.eye(d)
    idx = np.arange(d - 1)
    omega[idx, idx + 1] = -rho
    omega[idx + 1, idx] = -rho
    return omega


def generate_chain_graph(n: int, d: int, rho: float, seed: int) -> DenseMatrix:
    """Gaussian samples whose precision matrix is tridiagonal, unit diagonal,
    off-diagonal ``-rho``.

    Uses the bidiagonal Cholesky factor ``Omega = L L^T`` and solves
    ``L^T x = z`` row-wise, so ``cov(x) = Omega^{-1}``.
    """
    if not abs(rho) < 1:
        raise UsageError("need |rho| < 1")
    if n < 1 or d < 1:
        raise UsageError("n and d must be positive")
    diag = np.empty(d)
    sub = np.zeros(max(d - 1, 0))
    diag[0] = 1.0
    for i in range(1, d):
        sub[i - 1] = -rho / diag[i - 1]
        rem = 1.0 - sub[i - 1] ** 2
        if rem <= 0:
            raise UsageError(f"chain precision with rho={rho} is not positive definite for d={d}")
        diag[i] = math.sqrt(rem)
    z = rng_for(seed, STREAM_CHAIN).standard_normal((n, d))
    x = np.empty_like(z)
    x[:, d - 1] = z[:, d - 1] / diag[d - 1]
    for i in range(d - 2, -1, -1):
        x[:, i] = (z[:, i] - sub[i] * x[:, i + 1]) / diag[i]
    return DenseMatrix(x)
