"""
Discrete Caputo operators of order 1 < alpha < 2 applied to time histories.

Histories are sampled at mesh nodes together with the initial slope p'(0), which
enters through the slope-corrected second difference at level 0.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Union

import numpy as np

from ..exceptions import DomainError
from .kernel_coeffs import (
    GradedTemporalMesh,
    UniformTemporalMesh,
    derive_sigma,
    graded_coeff_table,
    uniform_coeff_table,
    uniform_weights,
)
from .special_functions import gamma

logger = logging.getLogger(__name__)

TemporalMesh = Union[UniformTemporalMesh, GradedTemporalMesh]


@dataclass(frozen=True)
class TimeHistory:
    values: np.ndarray
    slope: float
    mesh: TemporalMesh

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise DomainError("A time history needs at least the levels 0 and 1")
        if values.size > self.mesh.N + 1:
            raise DomainError(f"History has {values.size} levels but the mesh only {self.mesh.N + 1}")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SecondDifferenceSequence:
    values: np.ndarray
    kind: str  # "centered" on uniform meshes, "divided" on graded ones


def _column(steps: np.ndarray, ndim: int) -> np.ndarray:
    return steps.reshape((-1,) + (1,) * (ndim - 1))


def uniform_second_differences(values: np.ndarray, slope, tau: float) -> np.ndarray:
    """
    delta_t^2 p^j for j = 0..len(values)-2 along axis 0.

    Level 0 is (2/tau) * ((p^1 - p^0)/tau - p'(0)); later levels are centered.
    """
    values = np.asarray(values, dtype=float)
    diffs = np.empty_like(values[:-1])
    diffs[0] = (2.0 / tau) * ((values[1] - values[0]) / tau - slope)
    diffs[1:] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / tau ** 2
    return diffs


def graded_second_differences(values: np.ndarray, slope, nodes: np.ndarray) -> np.ndarray:
    """Divided second differences on a nonuniform mesh, divisor tau_k + tau_{k+1}."""
    values = np.asarray(values, dtype=float)
    steps = _column(np.diff(nodes[: values.shape[0]]), values.ndim)
    slopes = np.diff(values, axis=0) / steps
    diffs = np.empty_like(values[:-1])
    diffs[0] = (2.0 / steps[0]) * (slopes[0] - slope)
    diffs[1:] = (slopes[1:] - slopes[:-1]) / (steps[:-1] + steps[1:])
    return diffs


def second_differences(history: TimeHistory) -> SecondDifferenceSequence:
    if isinstance(history.mesh, UniformTemporalMesh):
        return SecondDifferenceSequence(
            uniform_second_differences(history.values, history.slope, history.mesh.tau), "centered"
        )
    return SecondDifferenceSequence(
        graded_second_differences(history.values, history.slope, history.mesh.nodes), "divided"
    )


def _check_level(history: TimeHistory, k: int):
    if not 1 <= k <= history.mesh.N - 1:
        raise DomainError(f"Operator level must satisfy 1 <= k <= N-1, got k={k}, N={history.mesh.N}")
    if history.values.size < k + 2:
        raise DomainError(f"Level {k} needs {k + 2} history values, got {history.values.size}")


def caputo_h3n3_uniform(history: TimeHistory, alpha: float, k: int) -> float:
    """H3N3-2sigma approximation of the Caputo derivative at t_{k+sigma}."""
    if not isinstance(history.mesh, UniformTemporalMesh):
        raise DomainError("caputo_h3n3_uniform needs a uniform mesh")
    _check_level(history, k)
    tau = history.mesh.tau
    diffs = uniform_second_differences(history.values[: k + 2], history.slope, tau)
    table = uniform_coeff_table(k, alpha, tau)
    return float(table.weights @ diffs[k::-1]) / gamma(2.0 - alpha)


def caputo_first_step(p0: float, p1: float, slope: float, alpha: float, tau: float) -> float:
    """H3-based operator at t_{1-alpha/3}, built from the level-0 second difference."""
    derive_sigma(alpha)
    if not tau > 0.0:
        raise DomainError(f"Time step must be positive, got {tau}")
    point = (1.0 - alpha / 3.0) * tau
    d0 = (2.0 / tau) * ((p1 - p0) / tau - slope)
    return point ** (2.0 - alpha) * d0 / gamma(3.0 - alpha)


def caputo_h3n3_graded(history: TimeHistory, alpha: float, mesh: GradedTemporalMesh, k: int) -> float:
    """H3N3-2sigma_k approximation of the Caputo derivative at t_{k+sigma_k}."""
    if history.mesh != mesh:
        raise DomainError("History was sampled on a different mesh")
    _check_level(history, k)
    diffs = graded_second_differences(history.values[: k + 2], history.slope, mesh.nodes)
    table = graded_coeff_table(k, alpha, mesh)
    return float(table.weights @ diffs[k::-1]) / gamma(2.0 - alpha)


def l2c_weights(k: int, alpha: float) -> np.ndarray:
    """
    L2C weights c_{l,k} for l = 0..k+1, multiplying u^l - u^{l-1}.

    With V_m = (m+1)^{2-alpha} - m^{2-alpha}, c_{l,k} = V_{k-l+1} [2 <= l <= k+1]
    minus V_{k-l-1} [0 <= l <= k-1]. At k = 1 this gives c_{1,1} = 0.
    """
    if k < 1:
        raise DomainError(f"L2C weights need k >= 1, got {k}")
    derive_sigma(alpha)
    q = 2.0 - alpha
    l = np.arange(k + 2)
    rising_index = k - l + 1
    falling_index = k - l - 1

    def increment(m):
        m = np.maximum(m, 0).astype(float)
        return (m + 1.0) ** q - m ** q

    weights = np.where(l >= 2, increment(rising_index), 0.0)
    weights -= np.where(l <= k - 1, increment(falling_index), 0.0)
    return weights


def analytic_caputo_power(mu: float, alpha: float, t):
    """Caputo derivative of t^mu: Gamma(mu+1)/Gamma(mu+1-alpha) * t^{mu-alpha}."""
    if mu <= 1.0:
        raise DomainError(f"Power test functions need mu > 1, got {mu}")
    derive_sigma(alpha)
    times = np.asarray(t, dtype=float)
    if np.any(times < 0.0):
        raise DomainError("Caputo derivative is evaluated at t >= 0 only")
    value = gamma(mu + 1.0) / gamma(mu + 1.0 - alpha) * np.power(times, mu - alpha)
    if np.ndim(t) == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class PowerTestFunction:
    mu: float

    def value(self, t):
        return np.power(np.asarray(t, dtype=float), self.mu)

    @property
    def slope(self) -> float:
        return 0.0

    def caputo(self, alpha: float, t):
        return analytic_caputo_power(self.mu, alpha, t)


TEST_FUNCTIONS = {mu: PowerTestFunction(float(mu)) for mu in (2, 3, 4, 5)}


@dataclass(frozen=True)
class ScanRow:
    N: int
    max_error: float
    order: Optional[float]


def truncation_error_scan(
    p: Union[PowerTestFunction, int],
    alpha: float,
    n_list: Iterable[int],
    T: float = 1.0,
    sigma_shift: float = 0.0,
) -> List[ScanRow]:
    """
    Max over 1 <= k <= N-1 of |analytic - discrete| at t_{k+sigma} for each N.

    A nonzero sigma_shift moves the evaluation point and rebuilds every weight
    around it, which breaks the second-order cancellation.
    """
    if not isinstance(p, PowerTestFunction):
        if p not in TEST_FUNCTIONS:
            raise DomainError(f"No built-in test function t^{p}")
        p = TEST_FUNCTIONS[p]
    sigma = derive_sigma(alpha) + sigma_shift
    inverse_gamma = 1.0 / gamma(2.0 - alpha)

    rows: List[ScanRow] = []
    for n in n_list:
        mesh = UniformTemporalMesh(T=T, N=int(n))
        if mesh.N < 2:
            raise DomainError("Truncation scans need N >= 2")
        tau = mesh.tau
        diffs = uniform_second_differences(p.value(mesh.nodes), p.slope, tau)
        scale = tau ** (2.0 - alpha) * inverse_gamma
        worst = 0.0
        for k in range(1, mesh.N):
            discrete = scale * float(uniform_weights(k, alpha, sigma) @ diffs[k::-1])
            exact = p.caputo(alpha, (k + sigma) * tau)
            worst = max(worst, abs(exact - discrete))
        order = None
        if rows and worst > 0.0 and rows[-1].max_error > 0.0:
            order = float(np.log(rows[-1].max_error / worst) / np.log(mesh.N / rows[-1].N))
        rows.append(ScanRow(N=mesh.N, max_error=worst, order=order))
        logger.debug(f"Truncation scan mu={p.mu} alpha={alpha} N={mesh.N}: {worst:.3e}")
    return rows
