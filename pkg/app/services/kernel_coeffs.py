"""
Discrete-convolution weights of the H3N3-2sigma Caputo formula.

The formula integrates the second derivative of a composite interpolant against
the kernel (t_{k+sigma} - s)^{1-alpha}:

* cubic Hermite on [t_0, t_{1/2}],
* cubic Newton on each interior half-interval [t_{l-1/2}, t_{l+1/2}],
* quadratic Newton on the stub [t_{k-1/2}, t_{k+sigma}].

Every weight is an integral of a linear function of s against the kernel and is
evaluated in closed form. Uniform tables carry the factor tau^{2-alpha}.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import numpy as np

from ..exceptions import DomainError
from .special_functions import power_step

logger = logging.getLogger(__name__)


def derive_sigma(alpha: float) -> float:
    """Superconvergence offset sigma = 1 - alpha/2 for 1 < alpha < 2."""
    if not (1.0 < alpha < 2.0):
        raise DomainError(f"Fractional order must lie in (1, 2), got {alpha}")
    return 1.0 - alpha / 2.0


@dataclass(frozen=True)
class FractionalOrder:
    alpha: float

    def __post_init__(self):
        derive_sigma(self.alpha)

    @property
    def sigma(self) -> float:
        return derive_sigma(self.alpha)


@dataclass(frozen=True)
class UniformTemporalMesh:
    """Equally spaced nodes t_k = k*tau on [0, T]."""

    T: float
    N: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 1:
            raise DomainError(f"Mesh needs N >= 1, got {self.N}")
        if not self.T > 0.0:
            raise DomainError(f"Horizon must be positive, got {self.T}")
        nodes = np.arange(self.N + 1) * self.tau
        nodes[-1] = self.T
        object.__setattr__(self, "nodes", nodes)

    @property
    def tau(self) -> float:
        return self.T / self.N

    def eval_point(self, k: int, alpha: float) -> float:
        """t_{k+sigma}."""
        return (k + derive_sigma(alpha)) * self.tau


@dataclass(frozen=True)
class GradedTemporalMesh:
    """
    Graded nodes t_k = (k/N)**r * T.

    Steps are indexed from one: tau(k) = t_k - t_{k-1}. Ratios rho_k and offsets
    sigma_k are defined for 1 <= k <= N-1.
    """

    T: float
    N: int
    r: float = 1.0
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 1:
            raise DomainError(f"Mesh needs N >= 1, got {self.N}")
        if not self.T > 0.0:
            raise DomainError(f"Horizon must be positive, got {self.T}")
        if self.r < 1.0:
            raise DomainError(f"Grading exponent must be >= 1, got {self.r}")
        nodes = self.T * (np.arange(self.N + 1) / self.N) ** self.r
        nodes[-1] = self.T
        object.__setattr__(self, "nodes", nodes)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    def tau(self, k: int) -> float:
        return float(self.nodes[k] - self.nodes[k - 1])

    def tau_bar(self, k: int) -> float:
        return self.tau(k) + self.tau(k + 1)

    def rho(self, k: int) -> float:
        if not 1 <= k <= self.N - 1:
            raise DomainError(f"Step ratio rho_k needs 1 <= k <= N-1, got k={k}")
        return self.tau(k) / self.tau(k + 1)

    def offset(self, k: int, alpha: float) -> float:
        """sigma_k = (1 - alpha/2) * rho_k."""
        return derive_sigma(alpha) * self.rho(k)

    def half_node(self, j: int) -> float:
        """t_{j+1/2}."""
        return 0.5 * float(self.nodes[j] + self.nodes[j + 1])

    def eval_point(self, k: int, alpha: float) -> float:
        """t_{k+sigma_k} = t_k + sigma_k * tau_{k+1}."""
        return float(self.nodes[k]) + self.offset(k, alpha) * self.tau(k + 1)


@dataclass(frozen=True)
class CoefficientTable:
    """Weights c_0..c_k for one time level; weights[l] multiplies the l-th newest second difference."""

    k: int
    alpha: float
    weights: np.ndarray
    mesh_kind: str
    eval_point: float

    def centered_weights(self) -> np.ndarray:
        """
        Weights rescaled to centered second differences.

        Graded tables multiply divided differences, which are half the centered
        ones for l < k, so at r = 1 this reproduces the uniform table.
        """
        if self.mesh_kind != "graded":
            return self.weights.copy()
        scaled = self.weights.copy()
        scaled[:-1] *= 0.5
        return scaled


# Uniform closed forms in units of tau, before the tau^{2-alpha} factor.
# x = k + sigma is the evaluation point; y = l + sigma is the distance index.

def _hermite_newest(x, q: float):
    q3 = q + 1.0
    return 1.5 * (
        power_step(x - 0.5, 0.5, q3) / (q * q3)
        - np.power(x, q) / (3.0 * q)
        - np.power(x - 0.5, q) / (6.0 * q)
    )


def _hermite_oldest(x, q: float):
    q3 = q + 1.0
    return 1.5 * (
        -power_step(x - 0.5, 0.5, q3) / (q * q3)
        + np.power(x, q) / q
        - np.power(x - 0.5, q) / (2.0 * q)
    )


def _newton_rising(y, q: float):
    q3 = q + 1.0
    return (
        power_step(y + 0.5, 1.0, q3) / (q * q3)
        - np.power(y + 1.5, q) / (2.0 * q)
        - np.power(y + 0.5, q) / (2.0 * q)
    )


def _newton_falling(y, q: float):
    q3 = q + 1.0
    return (
        -power_step(y - 0.5, 1.0, q3) / (q * q3)
        + 3.0 * np.power(y + 0.5, q) / (2.0 * q)
        - np.power(y - 0.5, q) / (2.0 * q)
    )


def _stub(sigma: float, q: float) -> float:
    return (sigma + 0.5) ** q / q


def _history_weights(count: int, alpha: float, sigma: float) -> np.ndarray:
    """c_l for l = 0..count-1 as they appear at any level k >= l + 2."""
    q = 2.0 - alpha
    y = np.arange(count, dtype=float) + sigma
    weights = np.empty(count)
    if count == 0:
        return weights
    weights[0] = _newton_rising(sigma, q) + _stub(sigma, q)
    if count > 1:
        weights[1:] = _newton_rising(y[1:], q) + _newton_falling(y[1:], q)
    return weights


def _newest_pair(k: int, alpha: float, sigma: float) -> tuple:
    """(c_{k-1}, c_k) at level k."""
    q = 2.0 - alpha
    x = k + sigma
    if k == 1:
        return _hermite_newest(x, q) + _stub(sigma, q), _hermite_oldest(x, q)
    return (
        _hermite_newest(x, q) + _newton_falling(k - 1 + sigma, q),
        _hermite_oldest(x, q),
    )


def uniform_weights(k: int, alpha: float, sigma: Optional[float] = None) -> np.ndarray:
    """Uniform weights in units of tau^{2-alpha}; sigma defaults to 1 - alpha/2."""
    if k < 1:
        raise DomainError(f"Coefficient level must be >= 1, got {k}")
    if sigma is None:
        sigma = derive_sigma(alpha)
    else:
        derive_sigma(alpha)
    weights = np.empty(k + 1)
    weights[: k - 1] = _history_weights(k - 1, alpha, sigma)
    weights[k - 1], weights[k] = _newest_pair(k, alpha, sigma)
    return weights


def uniform_coeff_table(k: int, alpha: float, tau: float) -> CoefficientTable:
    """Uniform H3N3-2sigma weights c_0^{(k)}..c_k^{(k)} from the closed forms."""
    if not tau > 0.0:
        raise DomainError(f"Time step must be positive, got {tau}")
    weights = uniform_weights(k, alpha) * tau ** (2.0 - alpha)
    return CoefficientTable(
        k=k,
        alpha=alpha,
        weights=weights,
        mesh_kind="uniform",
        eval_point=(k + derive_sigma(alpha)) * tau,
    )


def linear_power_integral(slope, intercept, lo, hi, c: float, alpha: float):
    """
    Exact value of the integral of (slope*s + intercept) * (c - s)^{1-alpha} over [lo, hi].

    With u = c - s the integrand becomes ((slope*c + intercept) - slope*u) * u^{1-alpha},
    whose antiderivative is a u^{2-alpha} term plus a u^{3-alpha} term.
    """
    q = 2.0 - alpha
    q3 = 3.0 - alpha
    near = np.asarray(c - np.asarray(hi, dtype=float))
    width = np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float)
    if np.any(near < 0.0):
        raise DomainError("Integration window extends past the evaluation point")
    value_at_c = slope * c + intercept
    return (
        value_at_c * power_step(near, width, q) / q
        - slope * power_step(near, width, q3) / q3
    )


def graded_coeff_table(k: int, alpha: float, mesh: GradedTemporalMesh) -> CoefficientTable:
    """Graded weights c~_0..c~_k at t_{k+sigma_k}; they multiply divided second differences."""
    if not 1 <= k <= mesh.N - 1:
        raise DomainError(f"Graded level must satisfy 1 <= k <= N-1, got k={k}, N={mesh.N}")
    derive_sigma(alpha)
    t = mesh.nodes
    c = mesh.eval_point(k, alpha)
    q = 2.0 - alpha
    half = 0.5 * (t[:-1] + t[1:])  # half[j] = t_{j+1/2}

    rising = np.empty(k + 1)  # rising[j] pairs with the newer difference of interval j
    rising[1] = linear_power_integral(6.0 / t[2], -2.0 * t[1] / t[2], 0.0, half[0], c, alpha)
    if k >= 2:
        j = np.arange(2, k + 1)
        span = t[j + 1] - t[j - 2]
        rising[2:] = linear_power_integral(
            6.0 / span,
            -2.0 * (t[j] + t[j - 1] + t[j - 2]) / span,
            half[j - 2],
            half[j - 1],
            c,
            alpha,
        )

    falling = np.empty(k + 1)
    if k >= 2:
        j = np.arange(1, k)
        span = t[j + 2] - t[j - 1]
        falling[1:k] = linear_power_integral(
            -6.0 / span,
            2.0 * (t[j + 2] + t[j + 1] + t[j]) / span,
            half[j - 1],
            half[j],
            c,
            alpha,
        )
    falling[k] = 2.0 * (c - half[k - 1]) ** q / q

    weights = np.empty(k + 1)
    l = np.arange(k)
    weights[:k] = rising[k - l] + falling[k - l]
    weights[k] = linear_power_integral(-3.0 / t[2], 2.0 * half[1] / t[2], 0.0, half[0], c, alpha)
    return CoefficientTable(k=k, alpha=alpha, weights=weights, mesh_kind="graded", eval_point=c)


@dataclass(frozen=True)
class PropertyViolation:
    family: str
    k: int
    alpha: float
    margin: float


@dataclass
class PropertyReport:
    k_max: int
    tau: float
    alphas: List[float]
    checks: int = 0
    violations: List[PropertyViolation] = field(default_factory=list)
    # max over k of the squared-newest-weight sum against its envelope without the unknown constant
    sum1_ratio: Dict[float, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        status = "all pass" if self.ok else f"{len(self.violations)} violations"
        return f"k_max={self.k_max} tau={self.tau:g} alphas={len(self.alphas)} checks={self.checks}: {status}"


def _squared_sum_envelope(k: np.ndarray, alpha: float, sigma: float, tau: float) -> np.ndarray:
    q = 2.0 - alpha
    growth = 3.0 - 2.0 * alpha
    if abs(growth) < 1e-12:
        tail = np.log((k + sigma) / (1.0 + sigma))
    else:
        tail = ((k + sigma) ** growth - (1.0 + sigma) ** growth) / growth
    bracket = (1.0 + sigma) ** (2.0 - 2.0 * alpha) + tail
    return (
        9.0 * tau ** (4.0 - 2.0 * alpha) * sigma ** 2 * (1.0 + sigma) ** 2 * bracket
        / (4.0 * (1.0 + 2.0 * sigma) ** 2 * q ** 2)
    )


def _newest_pairs(k_max: int, alpha: float, sigma: float) -> tuple:
    """(c_{k-1}^{(k)}, c_k^{(k)}) for k = 1..k_max, vectorized over k."""
    q = 2.0 - alpha
    levels = np.arange(1, k_max + 1, dtype=float)
    x = levels + sigma
    newest = _hermite_newest(x, q) + np.where(
        levels == 1.0,
        _stub(sigma, q),
        _newton_falling(np.maximum(levels - 1.0, 1.0) + sigma, q),
    )
    return newest, _hermite_oldest(x, q)


def check_coefficient_properties(k_max: int, alpha_grid: Iterable[float], tau: float) -> PropertyReport:
    """
    Scan every level k <= k_max for each alpha and record violations of:
    strict decrease, the c_k lower bound, 4*sigma*c_0 - (1+2*sigma)*c_1 > 0,
    and the bound on the running sum of c_{m-1}^{(m)}.
    """
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    if not tau > 0.0:
        raise DomainError(f"Time step must be positive, got {tau}")
    alphas = [float(a) for a in alpha_grid]
    report = PropertyReport(k_max=k_max, tau=tau, alphas=alphas)
    horizon = k_max * tau
    levels = np.arange(1, k_max + 1)

    for alpha in alphas:
        sigma = derive_sigma(alpha)
        scale = tau ** (2.0 - alpha)
        history = _history_weights(max(k_max - 1, 1), alpha, sigma) * scale
        newest, oldest = (w * scale for w in _newest_pairs(k_max, alpha, sigma))

        # smallest gap inside history[0..n], indexed by n
        gaps = -np.diff(history)
        history_margin = np.concatenate(([np.inf], np.minimum.accumulate(gaps)))
        decrease = newest - oldest
        tail = levels >= 2
        idx = levels[tail] - 2
        decrease[tail] = np.minimum.reduce([
            history_margin[idx],
            history[idx] - newest[tail],
            decrease[tail],
        ])

        lower = oldest - 0.375 * (levels + sigma) ** (1.0 - alpha) * scale

        c0 = np.where(levels == 1, newest[0], history[0])
        c1 = np.where(levels == 1, oldest[0], np.where(levels == 2, newest, history[min(1, history.size - 1)]))
        combination = 4.0 * sigma * c0 - (1.0 + 2.0 * sigma) * c1

        bound = (8.0 * sigma + 21.0) * horizon ** (2.0 - alpha) / (16.0 * (1.0 + 2.0 * sigma) * sigma)
        running = bound - np.cumsum(newest)

        for family, margins in (
            ("decrease", decrease),
            ("lower_bound", lower),
            ("positive_combination", combination),
            ("running_sum", running),
        ):
            report.checks += margins.size
            for i in np.flatnonzero(~(margins > 0.0)):
                report.violations.append(PropertyViolation(family, int(levels[i]), alpha, float(margins[i])))

        squared = np.cumsum(oldest ** 2)
        envelope = _squared_sum_envelope(levels.astype(float), alpha, sigma, tau)
        report.sum1_ratio[alpha] = float(np.max(squared / envelope))

    for violation in report.violations[:20]:
        logger.warning(
            f"Coefficient property {violation.family} fails at k={violation.k}, "
            f"alpha={violation.alpha}: margin {violation.margin:.3e}"
        )
    logger.info(report.summary())
    return report
