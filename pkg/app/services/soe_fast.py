"""
Sum-of-exponentials compression of t^{-gamma} and the recursive fast history.

The kernel is written as t^{-gamma} = (1/Gamma(gamma)) * int_0^inf e^{-ts} s^{gamma-1} ds
and discretized with Gauss-Jacobi on [0, 2^j0] plus Gauss-Legendre on the dyadic
panels [2^j, 2^{j+1}]. Each exponential then carries an accumulator that is
updated in O(1) per time level.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..exceptions import DomainError, SoeConstructionError
from .kernel_coeffs import GradedTemporalMesh, derive_sigma
from .quadrature import gauss_jacobi, gauss_legendre
from .special_functions import gamma as gamma_function

logger = logging.getLogger(__name__)

VERIFICATION_POINTS = 10_000
SERIES_THRESHOLD = 0.05
SERIES_TERMS = 12
MAX_REFINEMENTS = 4


@dataclass(frozen=True)
class SoeApproximation:
    gamma: float
    epsilon: float
    delta: float
    T: float
    nodes: np.ndarray
    weights: np.ndarray
    max_error: float

    @property
    def count(self) -> int:
        return int(self.nodes.size)


def nodes_per_panel(epsilon: float) -> int:
    return int(math.ceil(0.7 * math.log10(1.0 / epsilon))) + 4


def kernel_error(soe_nodes: np.ndarray, soe_weights: np.ndarray, gamma: float, times: np.ndarray) -> float:
    """Largest |t^-gamma - sum| / max(1, t^-gamma) over the given times."""
    exact = np.power(times, -gamma)
    approx = np.exp(-np.outer(times, soe_nodes)) @ soe_weights
    return float(np.max(np.abs(approx - exact) / np.maximum(1.0, exact)))


def _assemble(gamma: float, n: int, j0: int, j1: int):
    x, lam = gauss_jacobi(n, 0.0, gamma - 1.0)
    low = 2.0 ** j0
    nodes = [0.5 * low * (1.0 + x)]
    weights = [(0.5 * low) ** gamma * lam]

    xl, ll = gauss_legendre(n)
    for j in range(j0, j1):
        a = 2.0 ** j
        s = 0.5 * a * (3.0 + xl)
        nodes.append(s)
        weights.append(0.5 * a * ll * np.power(s, gamma - 1.0))

    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights) / gamma_function(gamma)
    return nodes, weights


def build_soe(gamma: float, epsilon: float, delta: float, T: float) -> SoeApproximation:
    """
    Positive nodes and weights with |t^-gamma - sum w e^{-s t}| <= epsilon * max(1, t^-gamma)
    on [delta, T], checked on a 10^4-point geometric grid.
    """
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"SOE exponent must lie in (0, 1), got {gamma}")
    if not 0.0 < delta < T:
        raise DomainError(f"SOE window needs 0 < delta < T, got delta={delta}, T={T}")
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"SOE tolerance must lie in (0, 1), got {epsilon}")

    grid = np.geomspace(delta, T, VERIFICATION_POINTS)
    j0 = int(math.floor(math.log2(1.0 / T))) - 2
    cutoff = (math.log(1.0 / epsilon) + 5.0) / delta
    base_j1 = max(int(math.ceil(math.log2(cutoff))), j0 + 1)
    error = math.inf

    for attempt in range(MAX_REFINEMENTS + 1):
        n = nodes_per_panel(epsilon) + 2 * attempt
        j1 = base_j1 + attempt
        nodes, weights = _assemble(gamma, n, j0, j1)
        error = kernel_error(nodes, weights, gamma, grid)
        logger.debug(f"SOE attempt {attempt}: {nodes.size} exponentials, grid error {error:.3e}")
        if error <= epsilon:
            logger.info(f"Built SOE gamma={gamma} eps={epsilon:g} delta={delta:g} T={T:g} with {nodes.size} exponentials")
            return SoeApproximation(
                gamma=gamma, epsilon=epsilon, delta=delta, T=T,
                nodes=nodes, weights=weights, max_error=error,
            )

    raise SoeConstructionError(
        f"SOE for gamma={gamma}, eps={epsilon:g} on [{delta:g}, {T:g}] stalled at error {error:.3e}"
    )


def soe_eval(soe: SoeApproximation, t):
    """Sum of exponentials at t, which must lie inside [delta, T]."""
    times = np.asarray(t, dtype=float)
    slack = 1e-12
    if np.any(times < soe.delta * (1.0 - slack)) or np.any(times > soe.T * (1.0 + slack)):
        raise DomainError(f"t={t!r} lies outside the SOE window [{soe.delta:g}, {soe.T:g}]")
    value = np.exp(-np.multiply.outer(times, soe.nodes)) @ soe.weights
    if np.ndim(t) == 0:
        return float(value)
    return value


def _phi_series(x: np.ndarray, shift: int) -> np.ndarray:
    # sum_n (-x)^n / n! / (n + shift)
    total = np.zeros_like(x)
    term = np.ones_like(x)
    for n in range(SERIES_TERMS):
        total += term / (n + shift)
        term = term * (-x) / (n + 1)
    return total


def _mean_exponential(x: np.ndarray) -> np.ndarray:
    """int_0^1 e^{-xu} du."""
    small = x < SERIES_THRESHOLD
    safe = np.where(small, 1.0, x)
    return np.where(small, _phi_series(x, 1), -np.expm1(-safe) / safe)


def _first_moment_exponential(x: np.ndarray) -> np.ndarray:
    """int_0^1 u e^{-xu} du."""
    small = x < SERIES_THRESHOLD
    safe = np.where(small, 1.0, x)
    closed = (-np.expm1(-safe) - safe * np.exp(-safe)) / safe ** 2
    return np.where(small, _phi_series(x, 2), closed)


def hat_exponential_integral(value_lo: float, value_hi: float, lo: float, hi: float, t_eval: float, rates: np.ndarray) -> np.ndarray:
    """
    Integral over [lo, hi] of a linear weight (value_lo at lo, value_hi at hi)
    times e^{-rate (t_eval - s)}, one value per rate.
    """
    width = hi - lo
    x = rates * width
    near = np.exp(-rates * (t_eval - hi))
    return near * width * (
        value_hi * _mean_exponential(x) + (value_lo - value_hi) * _first_moment_exponential(x)
    )


@dataclass(frozen=True)
class FastStepCoefficients:
    """F^k = decay * F^{k-1} + newer * d^k + older * d^{k-1}, per exponential."""

    decay: np.ndarray
    newer: np.ndarray
    older: np.ndarray


@dataclass(frozen=True)
class FastHistoryState:
    accumulators: np.ndarray  # shape (N_exp,) + field shape
    newest: np.ndarray
    previous: np.ndarray
    level: int


def uniform_fast_coefficients(soe: SoeApproximation, sigma: float, tau: float, k: int) -> FastStepCoefficients:
    s = soe.nodes
    if k == 1:
        t_eval = (1.0 + sigma) * tau
        return FastStepCoefficients(
            decay=np.zeros_like(s),
            newer=hat_exponential_integral(-0.5, 0.25, 0.0, 0.5 * tau, t_eval, s),
            older=hat_exponential_integral(1.5, 0.75, 0.0, 0.5 * tau, t_eval, s),
        )
    if k < 1:
        raise DomainError(f"Fast history level must be >= 1, got {k}")
    # shifted so t_{k-1/2} = 0; only distances matter
    t_eval = (sigma + 0.5) * tau
    return FastStepCoefficients(
        decay=np.exp(-s * tau),
        newer=hat_exponential_integral(-0.5, 0.5, -tau, 0.0, t_eval, s),
        older=hat_exponential_integral(1.5, 0.5, -tau, 0.0, t_eval, s),
    )


def _expand(vector: np.ndarray, ndim: int) -> np.ndarray:
    return vector.reshape(vector.shape + (1,) * ndim)


def advance_fast_history(state: Optional[FastHistoryState], coefficients: FastStepCoefficients, d_new, d_old) -> FastHistoryState:
    d_new = np.asarray(d_new, dtype=float)
    d_old = np.asarray(d_old, dtype=float)
    ndim = d_new.ndim
    accumulators = _expand(coefficients.newer, ndim) * d_new + _expand(coefficients.older, ndim) * d_old
    if state is not None:
        accumulators = accumulators + _expand(coefficients.decay, ndim) * state.accumulators
    level = 1 if state is None else state.level + 1
    return FastHistoryState(accumulators=accumulators, newest=d_new, previous=d_old, level=level)


def init_fast_history_uniform(d0, d1, soe: SoeApproximation, sigma: float, tau: float) -> FastHistoryState:
    """F_m^1 from delta_t^2 p^0 and delta_t^2 p^1."""
    return advance_fast_history(None, uniform_fast_coefficients(soe, sigma, tau, 1), d1, d0)


def advance_fast_history_uniform(state: FastHistoryState, d_k, d_km1, soe: SoeApproximation, sigma: float, tau: float) -> FastHistoryState:
    """F_m^k = e^{-s_m tau} F_m^{k-1} + A_m d^k + B_m d^{k-1}."""
    coefficients = uniform_fast_coefficients(soe, sigma, tau, state.level + 1)
    return advance_fast_history(state, coefficients, d_k, d_km1)


def history_sum(state: FastHistoryState, soe: SoeApproximation):
    """sum_m w_m F_m^k."""
    return np.tensordot(soe.weights, state.accumulators, axes=(0, 0))


def fast_caputo_uniform(state: FastHistoryState, soe: SoeApproximation, alpha: float, tau: float):
    """Fast H3N3-2sigma operator at t_{k+sigma} for the level held in state."""
    q = 2.0 - alpha
    stub = tau ** q * (derive_sigma(alpha) + 0.5) ** q / q
    return (history_sum(state, soe) + stub * state.newest) / gamma_function(q)


def graded_fast_initial_coeffs(soe: SoeApproximation, mesh: GradedTemporalMesh, alpha: float) -> FastStepCoefficients:
    """F~^1 coefficients: the graded Hermite weights on [t_0, t_{1/2}] against e^{-s(t_{1+sigma_1} - s')}."""
    t = mesh.nodes
    t_eval = mesh.eval_point(1, alpha)
    half = mesh.half_node(0)
    s = soe.nodes
    return FastStepCoefficients(
        decay=np.zeros_like(s),
        newer=hat_exponential_integral(-2.0 * t[1] / t[2], (6.0 * half - 2.0 * t[1]) / t[2], 0.0, half, t_eval, s),
        older=hat_exponential_integral(2.0 * mesh.half_node(1) / t[2], (2.0 * mesh.half_node(1) - 3.0 * half) / t[2], 0.0, half, t_eval, s),
    )


def graded_fast_coeffs(k: int, soe: SoeApproximation, mesh: GradedTemporalMesh, alpha: float) -> FastStepCoefficients:
    """A~_m^k, B~_m^k and the decay e^{-s_m (t_{k+sigma_k} - t_{k-1+sigma_{k-1}})}."""
    if k < 2:
        raise DomainError(f"Graded recursion coefficients need k >= 2, got {k}")
    if k > mesh.N - 1:
        raise DomainError(f"Graded level must be <= N-1, got k={k}, N={mesh.N}")
    t = mesh.nodes
    lo = mesh.half_node(k - 2)
    hi = mesh.half_node(k - 1)
    span = t[k + 1] - t[k - 2]
    t_eval = mesh.eval_point(k, alpha)
    s = soe.nodes

    def rising(point):
        return (6.0 * point - 2.0 * (t[k] + t[k - 1] + t[k - 2])) / span

    def falling(point):
        return (2.0 * (t[k + 1] + t[k] + t[k - 1]) - 6.0 * point) / span

    step = t_eval - mesh.eval_point(k - 1, alpha)
    return FastStepCoefficients(
        decay=np.exp(-s * step),
        newer=hat_exponential_integral(rising(lo), rising(hi), lo, hi, t_eval, s),
        older=hat_exponential_integral(falling(lo), falling(hi), lo, hi, t_eval, s),
    )


def graded_stub_weight(k: int, mesh: GradedTemporalMesh, alpha: float) -> float:
    """(2/(2-alpha)) (t_{k+sigma_k} - t_{k-1/2})^{2-alpha}."""
    q = 2.0 - alpha
    return 2.0 * (mesh.eval_point(k, alpha) - mesh.half_node(k - 1)) ** q / q


def uniform_cutoff(alpha: float, tau: float) -> float:
    return derive_sigma(alpha) * tau


def graded_cutoff(mesh: GradedTemporalMesh, alpha: float) -> float:
    """min over k of tau_k/2 + sigma_k tau_{k+1}."""
    return min(
        mesh.eval_point(k, alpha) - mesh.half_node(k - 1) for k in range(1, mesh.N)
    )
