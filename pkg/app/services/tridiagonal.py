"""
Thomas elimination for tridiagonal systems.

Row j of the system reads lower[j]*u[j-1] + diag[j]*u[j] + upper[j]*u[j+1] = rhs[j].
lower[0] and upper[-1] are ignored.

The sweeps are compiled with numba and release the GIL, so sweep cells running on a
thread pool solve their levels concurrently.
"""

import logging

import numpy as np
from numba import njit

from ..exceptions import DomainError, SingularSystemError

logger = logging.getLogger(__name__)

PIVOT_FLOOR = 1e-300


@njit(cache=True, nogil=True)
def _factor(lower, diag, upper, modified_upper, inverse_pivot):
    """Fill the elimination factors in place; return the first singular row, or -1."""
    n = diag.shape[0]
    pivot = diag[0]
    for j in range(n):
        if j > 0:
            pivot = diag[j] - lower[j] * modified_upper[j - 1]
        if abs(pivot) < PIVOT_FLOOR:
            inverse_pivot[j] = pivot
            return j
        inverse_pivot[j] = 1.0 / pivot
        if j < n - 1:
            modified_upper[j] = upper[j] * inverse_pivot[j]
    return -1


@njit(cache=True, nogil=True)
def _sweep(lower, modified_upper, inverse_pivot, d):
    n = d.shape[0]
    x = np.empty_like(d)
    x[0] = d[0] * inverse_pivot[0]
    for j in range(1, n):
        x[j] = (d[j] - lower[j] * x[j - 1]) * inverse_pivot[j]
    for j in range(n - 2, -1, -1):
        x[j] -= modified_upper[j] * x[j + 1]
    return x


@njit(cache=True, nogil=True)
def _sweep_columns(lower, modified_upper, inverse_pivot, d):
    """Same as _sweep for d of shape (n, columns)."""
    n = d.shape[0]
    x = np.empty_like(d)
    x[0, :] = d[0, :] * inverse_pivot[0]
    for j in range(1, n):
        x[j, :] = (d[j, :] - lower[j] * x[j - 1, :]) * inverse_pivot[j]
    for j in range(n - 2, -1, -1):
        x[j, :] -= modified_upper[j] * x[j + 1, :]
    return x


class ThomasFactorization:
    """Forward-elimination factors of one tridiagonal matrix, reusable across right-hand sides."""

    def __init__(self, lower, diag, upper):
        lower = np.ascontiguousarray(lower, dtype=np.float64)
        diag = np.ascontiguousarray(diag, dtype=np.float64)
        upper = np.ascontiguousarray(upper, dtype=np.float64)
        if not (lower.shape == diag.shape == upper.shape) or diag.ndim != 1 or diag.size == 0:
            raise DomainError("Tridiagonal bands must be non-empty 1-D arrays of equal length")

        self.size = diag.size
        self.lower = lower
        self.modified_upper = np.zeros(self.size)
        self.inverse_pivot = np.zeros(self.size)
        row = _factor(lower, diag, upper, self.modified_upper, self.inverse_pivot)
        if row >= 0:
            # the failing pivot is left in its slot
            raise SingularSystemError(int(row), float(self.inverse_pivot[row]))

    def solve(self, rhs) -> np.ndarray:
        rhs = np.ascontiguousarray(rhs, dtype=np.float64)
        if rhs.shape[0] != self.size:
            raise DomainError(f"Right-hand side has {rhs.shape[0]} rows, matrix has {self.size}")
        if rhs.ndim == 1:
            return _sweep(self.lower, self.modified_upper, self.inverse_pivot, rhs)
        return _sweep_columns(self.lower, self.modified_upper, self.inverse_pivot, rhs)


def thomas_solve(lower, diag, upper, rhs) -> np.ndarray:
    """Solve one tridiagonal system in O(n)."""
    return ThomasFactorization(lower, diag, upper).solve(rhs)
