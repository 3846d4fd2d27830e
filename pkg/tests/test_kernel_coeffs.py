import numpy as np
import pytest
from scipy import integrate

from app.exceptions import DomainError
from app.services.kernel_coeffs import (
    FractionalOrder,
    GradedTemporalMesh,
    UniformTemporalMesh,
    check_coefficient_properties,
    derive_sigma,
    graded_coeff_table,
    linear_power_integral,
    uniform_coeff_table,
)


def _integral(hat, lo, hi, c, alpha):
    value, _ = integrate.quad(lambda s: hat(s) * (c - s) ** (1.0 - alpha), lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
    return value


def _uniform_oracle(k, alpha, tau):
    """Weights from the defining integrals; weights[l] multiplies the centered difference at level k - l."""
    sigma = derive_sigma(alpha)
    c = (k + sigma) * tau
    t = lambda j: j * tau
    weights = np.zeros(k + 1)
    for m in range(k + 1):
        total = 0.0
        if m == 0:
            total += _integral(lambda s: (3.0 * tau - 3.0 * s) / (2.0 * tau), 0.0, 0.5 * tau, c, alpha)
        if m == 1:
            total += _integral(lambda s: (3.0 * s - tau) / (2.0 * tau), 0.0, 0.5 * tau, c, alpha)
        if m >= 2:
            total += _integral(lambda s: (s - t(m - 1)) / tau, t(m - 1.5), t(m - 0.5), c, alpha)
        if 1 <= m <= k - 1:
            total += _integral(lambda s: (t(m + 1) - s) / tau, t(m - 0.5), t(m + 0.5), c, alpha)
        if m == k:
            total += (c - t(k - 0.5)) ** (2.0 - alpha) / (2.0 - alpha)
        weights[k - m] = total
    return weights


def _graded_oracle(k, alpha, mesh):
    t = mesh.nodes
    c = mesh.eval_point(k, alpha)
    half = lambda j: 0.5 * (t[j] + t[j + 1])
    weights = np.zeros(k + 1)
    for m in range(k + 1):
        total = 0.0
        if m == 0:
            total += _integral(lambda s: (2.0 * half(1) - 3.0 * s) / t[2], 0.0, half(0), c, alpha)
        if m == 1:
            total += _integral(lambda s: (6.0 * s - 2.0 * t[1]) / t[2], 0.0, half(0), c, alpha)
        if m >= 2:
            span = t[m + 1] - t[m - 2]
            total += _integral(
                lambda s: (6.0 * s - 2.0 * (t[m] + t[m - 1] + t[m - 2])) / span, half(m - 2), half(m - 1), c, alpha
            )
        if 1 <= m <= k - 1:
            span = t[m + 2] - t[m - 1]
            total += _integral(
                lambda s: (2.0 * (t[m + 2] + t[m + 1] + t[m]) - 6.0 * s) / span, half(m - 1), half(m), c, alpha
            )
        if m == k:
            total += 2.0 * (c - half(k - 1)) ** (2.0 - alpha) / (2.0 - alpha)
        weights[k - m] = total
    return weights


@pytest.mark.parametrize("alpha,sigma", [(1.5, 0.25), (1.1, 0.45), (1.9, 0.05)])
def test_derive_sigma(alpha, sigma):
    assert derive_sigma(alpha) == pytest.approx(sigma)
    assert FractionalOrder(alpha).sigma == pytest.approx(sigma)


@pytest.mark.parametrize("alpha", [1.0, 2.0, 0.5, 2.5])
def test_derive_sigma_rejects_orders_outside_open_interval(alpha):
    with pytest.raises(DomainError):
        derive_sigma(alpha)


def test_uniform_mesh_nodes():
    mesh = UniformTemporalMesh(T=1.0, N=10)
    assert mesh.nodes[0] == 0.0 and mesh.nodes[-1] == 1.0
    assert mesh.eval_point(3, 1.5) == pytest.approx(0.325)


def test_graded_mesh_reduces_to_uniform():
    graded = GradedTemporalMesh(T=1.0, N=16, r=1.0)
    uniform = UniformTemporalMesh(T=1.0, N=16)
    np.testing.assert_allclose(graded.nodes, uniform.nodes, rtol=1e-15, atol=1e-16)
    assert graded.rho(5) == pytest.approx(1.0)
    assert graded.offset(5, 1.5) == pytest.approx(0.25)


def test_graded_mesh_steps_increase():
    mesh = GradedTemporalMesh(T=1.0, N=20, r=3.0)
    assert np.all(np.diff(mesh.steps) > 0)
    assert all(0.0 < mesh.rho(k) < 1.0 for k in range(1, 20))
    with pytest.raises(DomainError):
        mesh.rho(20)


def test_first_level_difference_closed_form():
    table = uniform_coeff_table(1, 1.5, 1.0)
    assert table.weights[0] - table.weights[1] == pytest.approx(1.25 ** 0.5, rel=1e-12)


@pytest.mark.parametrize("k,alpha,tau", [(10, 1.3, 0.1), (1, 1.5, 1.0), (4, 1.9, 0.05), (7, 1.05, 0.2)])
def test_uniform_weights_match_quadrature(k, alpha, tau):
    table = uniform_coeff_table(k, alpha, tau)
    np.testing.assert_allclose(table.weights, _uniform_oracle(k, alpha, tau), rtol=1e-10)


def test_uniform_table_invariants():
    alpha, tau, k = 1.9, 0.01, 5
    sigma = derive_sigma(alpha)
    weights = uniform_coeff_table(k, alpha, tau).weights
    assert np.all(weights > 0)
    assert np.all(np.diff(weights) < 0)
    assert weights[-1] > 0.375 * (k + sigma) ** (1.0 - alpha) * tau ** (2.0 - alpha)
    assert 4 * sigma * weights[0] - (1 + 2 * sigma) * weights[1] > 0


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
def test_history_weights_are_level_stable(alpha):
    tau = 0.05
    for k in range(3, 40):
        current = uniform_coeff_table(k, alpha, tau).weights
        previous = uniform_coeff_table(k - 1, alpha, tau).weights
        np.testing.assert_allclose(current[: k - 2], previous[: k - 2], rtol=1e-15, atol=0.0)


def test_uniform_table_rejects_bad_input():
    with pytest.raises(DomainError):
        uniform_coeff_table(0, 1.5, 0.1)
    with pytest.raises(DomainError):
        uniform_coeff_table(3, 1.5, 0.0)


def test_linear_power_integral_matches_quadrature():
    value = linear_power_integral(2.0, -0.3, 0.1, 0.4, 0.55, 1.7)
    expected = _integral(lambda s: 2.0 * s - 0.3, 0.1, 0.4, 0.55, 1.7)
    assert value == pytest.approx(expected, rel=1e-12)


def test_graded_table_reduces_to_uniform():
    mesh = GradedTemporalMesh(T=1.0, N=32, r=1.0)
    graded = graded_coeff_table(8, 1.5, mesh)
    uniform = uniform_coeff_table(8, 1.5, 1.0 / 32)
    np.testing.assert_allclose(graded.centered_weights(), uniform.weights, rtol=1e-11)


def test_centered_weights_keep_the_level_zero_weight():
    table = graded_coeff_table(6, 1.7, GradedTemporalMesh(T=1.0, N=16, r=2.0))
    centered = table.centered_weights()
    assert centered[-1] == table.weights[-1]
    np.testing.assert_array_equal(centered[:-1], 0.5 * table.weights[:-1])


@pytest.mark.parametrize("r,k,alpha,N", [(2.0, 4, 1.3, 16), (3.0, 1, 1.9, 8), (2.5, 9, 1.6, 24)])
def test_graded_weights_match_quadrature(r, k, alpha, N):
    mesh = GradedTemporalMesh(T=1.0, N=N, r=r)
    table = graded_coeff_table(k, alpha, mesh)
    np.testing.assert_allclose(table.weights, _graded_oracle(k, alpha, mesh), rtol=1e-10)
    assert np.all(table.weights > 0)


def test_graded_table_rejects_levels_outside_mesh():
    mesh = GradedTemporalMesh(T=1.0, N=8, r=2.0)
    with pytest.raises(DomainError):
        graded_coeff_table(8, 1.5, mesh)
    with pytest.raises(DomainError):
        graded_coeff_table(0, 1.5, mesh)


def test_property_report_first_level():
    report = check_coefficient_properties(1, [1.5], 1.0)
    assert report.ok
    assert report.checks == 4


def test_property_report_all_pass_near_alpha_two():
    report = check_coefficient_properties(3, [1.999], 0.1)
    assert report.ok


def test_property_report_over_alpha_grid():
    report = check_coefficient_properties(300, [1.05, 1.3, 1.5, 1.7, 1.95], 1e-2)
    assert report.ok, report.violations[:5]
    assert set(report.sum1_ratio) == {1.05, 1.3, 1.5, 1.7, 1.95}
    assert all(np.isfinite(ratio) and ratio > 0 for ratio in report.sum1_ratio.values())


@pytest.mark.slow
def test_property_report_full_range():
    report = check_coefficient_properties(2000, np.arange(1.05, 1.96, 0.05), 1e-2)
    assert report.ok
