"""Dense linear-algebra primitives and the immutable problem container."""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from .errors import UsageError


class DenseMatrix:
    """Row-major ``n x d`` design matrix with a lazy column squared-norm cache.

    The wrapped array is copied into C order, marked read-only, and never
    mutated afterwards, so instances can be shared between concurrent solves.
    """

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, order="C", copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise UsageError(f"design matrix must be 2-d, got shape {arr.shape}")
        if arr.size == 0:
            raise UsageError("design matrix must be non-empty")
        if not np.all(np.isfinite(arr)):
            raise UsageError("design matrix has non-finite entries")
        arr.setflags(write=False)
        self._a = arr

    @property
    def array(self) -> np.ndarray:
        return self._a

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape

    @cached_property
    def col_sq_norms(self) -> np.ndarray:
        out = np.einsum("ij,ij->j", self._a, self._a)
        out.setflags(write=False)
        return out

    def column(self, j: int) -> np.ndarray:
        return self._a[:, j]

    def __repr__(self):
        return f"DenseMatrix(rows={self.rows}, cols={self.cols})"


def as_vector(v, name="vector") -> np.ndarray:
    out = np.asarray(v, dtype=np.float64)
    if out.ndim != 1:
        out = out.reshape(-1)
    if not np.all(np.isfinite(out)):
        raise UsageError(f"{name} has non-finite entries")
    return out


def mat_vec(a: DenseMatrix, v) -> np.ndarray:
    """Return ``A @ v``."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (a.cols,):
        raise UsageError(f"mat_vec: expected vector of length {a.cols}, got shape {v.shape}")
    return a.array @ v


def mat_t_vec(a: DenseMatrix, v) -> np.ndarray:
    """Return ``A.T @ v``."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (a.rows,):
        raise UsageError(f"mat_t_vec: expected vector of length {a.rows}, got shape {v.shape}")
    return a.array.T @ v


class Problem:
    """Immutable ``(X, y)`` pair for ``y = X theta + noise``.

    Parameters
    ----------
    x : DenseMatrix or array_like, shape (n, d)
    y : array_like, shape (n,)
    """

    def __init__(self, x, y):
        self.x = x if isinstance(x, DenseMatrix) else DenseMatrix(x)
        y = np.array(as_vector(y, "y"), copy=True)
        if y.shape[0] != self.x.rows:
            raise UsageError(f"y has length {y.shape[0]} but X has {self.x.rows} rows")
        y.setflags(write=False)
        self.y = y
        self.sqrt_n = math.sqrt(self.n)

    @property
    def n(self) -> int:
        return self.x.rows

    @property
    def d(self) -> int:
        return self.x.cols

    @cached_property
    def y_norm(self) -> float:
        return float(np.linalg.norm(self.y))

    @cached_property
    def smooth_floor(self) -> float:
        # threshold on ||r||_2 / sqrt(n)
        return 1e-8 * (self.y_norm / self.sqrt_n + 1.0)

    def residual(self, theta) -> np.ndarray:
        return self.y - self.x.array @ theta

    def __repr__(self):
        return f"Problem(n={self.n}, d={self.d})"
