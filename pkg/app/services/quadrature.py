"""
Gauss quadrature rules on [-1, 1].

Jacobi rules come from the Golub-Welsch eigenvalue problem for the three-term
recurrence; Legendre rules come straight from numpy.
"""

from typing import Tuple

import numpy as np

from ..exceptions import DomainError
from .special_functions import gamma


def jacobi_recurrence(n: int, a: float, b: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Recurrence coefficients of the monic Jacobi polynomials for weight
    (1-x)**a (1+x)**b.

    Returns (alpha[0..n-1], beta[1..n-1], mu0) where mu0 is the total mass.
    """
    if n < 1:
        raise DomainError(f"Quadrature needs at least one node, got {n}")
    if a <= -1.0 or b <= -1.0:
        raise DomainError(f"Jacobi exponents must exceed -1, got a={a}, b={b}")

    ab = a + b
    i = np.arange(n, dtype=float)
    alpha = np.empty(n)
    alpha[0] = (b - a) / (ab + 2.0)
    if n > 1:
        j = i[1:]
        alpha[1:] = (b * b - a * a) / ((2.0 * j + ab) * (2.0 * j + ab + 2.0))

    beta = np.empty(max(n - 1, 0))
    if n > 1:
        # j = 1 is written out so a + b = -1 does not divide by zero
        beta[0] = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab) ** 2 * (3.0 + ab))
        if n > 2:
            j = i[2:]
            beta[1:] = (
                4.0 * j * (j + a) * (j + b) * (j + ab)
                / ((2.0 * j + ab) ** 2 * (2.0 * j + ab + 1.0) * (2.0 * j + ab - 1.0))
            )

    mu0 = 2.0 ** (ab + 1.0) * gamma(a + 1.0) * gamma(b + 1.0) / gamma(ab + 2.0)
    return alpha, beta, mu0


def gauss_jacobi(n: int, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Jacobi rule, nodes ascending."""
    alpha, beta, mu0 = jacobi_recurrence(n, a, b)
    off = np.sqrt(beta)
    jacobi_matrix = np.diag(alpha) + np.diag(off, 1) + np.diag(off, -1)
    nodes, vectors = np.linalg.eigh(jacobi_matrix)
    order = np.argsort(nodes)
    nodes = nodes[order]
    weights = mu0 * vectors[0, order] ** 2
    return nodes, weights


def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule."""
    if n < 1:
        raise DomainError(f"Quadrature needs at least one node, got {n}")
    return np.polynomial.legendre.leggauss(n)
