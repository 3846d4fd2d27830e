import math

import numpy as np
import pytest

from app.exceptions import DomainError
from app.services.caputo_ops import graded_second_differences, l2c_weights, uniform_second_differences
from app.services.kernel_coeffs import GradedTemporalMesh, UniformTemporalMesh, derive_sigma, graded_coeff_table, uniform_coeff_table
from app.services.pde_solver import (
    SCHEMES,
    ProblemSpec,
    SpatialGrid,
    check_compatibility,
    first_step_solve,
    interior_step_solve,
    laplacian,
    norms,
    solve,
    solve_graded,
    solve_l2c,
    solve_uniform,
    uhat_postprocess,
)
from app.services.problems import example_51, example_52


def _rhs(problem, grid, t):
    return problem.source(grid.interior, t)


def test_spatial_grid():
    grid = SpatialGrid(L=2.0, M=8)
    assert grid.h == pytest.approx(0.25)
    assert grid.nodes[-1] == 2.0
    assert grid.interior.size == 7
    with pytest.raises(DomainError):
        SpatialGrid(L=1.0, M=1)


def test_problem_spec_requires_homogeneous_boundary_data():
    with pytest.raises(DomainError):
        ProblemSpec(
            source=lambda x, t: np.zeros_like(x),
            initial_value=lambda x: np.cos(x),
            initial_velocity=np.zeros_like,
            alpha=1.5,
        )
    with pytest.raises(DomainError):
        example_51(2.0)


def test_norms_of_sine():
    grid = SpatialGrid(L=1.0, M=1000)
    result = norms(np.sin(np.pi * grid.nodes) * (grid.nodes < 1.0), grid)
    assert result["l2"] == pytest.approx(math.sqrt(0.5), abs=1e-3)
    assert result["h1"] == pytest.approx(math.pi * math.sqrt(0.5), abs=1e-2)
    assert result["inf"] == pytest.approx(1.0)


def test_norms_reject_nonzero_boundary():
    grid = SpatialGrid(L=1.0, M=4)
    with pytest.raises(DomainError):
        norms(np.ones(5), grid)


def test_uhat_is_exact_for_linear_sequences():
    v = np.array([0.3, -1.2, 2.0])
    for alpha in (1.1, 1.5, 1.9):
        sigma = derive_sigma(alpha)
        for k in (1, 4, 10):
            np.testing.assert_allclose(
                uhat_postprocess((k + 1) * v, k * v, (k - 1) * v, sigma), (k + 1) * v, rtol=1e-14
            )


def test_first_step_satisfies_its_equation():
    alpha = 1.5
    problem = example_51(alpha)
    grid = SpatialGrid(L=1.0, M=32)
    mesh = UniformTemporalMesh(T=1.0, N=16)
    tau = mesh.tau
    u1 = first_step_solve(problem, grid, mesh)[1:-1]
    u0 = np.zeros_like(u1)
    point = (1.0 - alpha / 3.0) * tau
    g = 2.0 * point ** (2.0 - alpha) / (math.gamma(3.0 - alpha) * tau ** 2)
    lhs = g * (u1 - u0)
    rhs = laplacian((1.0 - alpha / 3.0) * u1 + (alpha / 3.0) * u0, grid.h) + _rhs(problem, grid, point)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-14)


def test_first_level_error_is_small():
    problem = example_51(1.5)
    grid = SpatialGrid(L=1.0, M=64)
    mesh = UniformTemporalMesh(T=1.0, N=64)
    u1 = first_step_solve(problem, grid, mesh)
    exact = problem.exact(grid.nodes, mesh.nodes[1])
    assert np.max(np.abs(u1 - exact)) <= 1e-5


@pytest.mark.parametrize("alpha", [1.2, 1.7])
def test_direct_scheme_satisfies_discrete_equation(alpha):
    problem = example_51(alpha)
    grid = SpatialGrid(L=1.0, M=20)
    mesh = UniformTemporalMesh(T=1.0, N=24)
    result = solve_uniform(problem, grid, mesh)
    interior = result.u[:, 1:-1]
    sigma = derive_sigma(alpha)
    tau = mesh.tau
    psi = np.zeros(grid.M - 1)
    inverse_gamma = 1.0 / math.gamma(2.0 - alpha)
    for k in (1, 2, 11, 23):
        diffs = uniform_second_differences(interior[: k + 2], psi, tau)
        weights = uniform_coeff_table(k, alpha, tau).weights
        lhs = inverse_gamma * (weights @ diffs[k::-1])
        rhs = (
            0.5 * (0.5 + sigma) * laplacian(interior[k + 1] + interior[k], grid.h)
            + 0.5 * (0.5 - sigma) * laplacian(interior[k] + interior[k - 1], grid.h)
            + _rhs(problem, grid, (k + sigma) * tau)
        )
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-11)
        assert result.eval_points[k] == pytest.approx((k + sigma) * tau)


def test_interior_step_recomputes_history():
    problem = example_51(1.5)
    grid = SpatialGrid(L=1.0, M=16)
    mesh = UniformTemporalMesh(T=1.0, N=12)
    result = solve_uniform(problem, grid, mesh)
    interior = result.u[:, 1:-1]
    step = interior_step_solve(problem, grid, mesh, interior[:7], 6)
    np.testing.assert_allclose(step, interior[7], rtol=1e-12, atol=1e-15)


def test_graded_scheme_satisfies_discrete_equation():
    alpha = 1.6
    problem = example_52(alpha)
    grid = SpatialGrid(L=1.0, M=16)
    mesh = GradedTemporalMesh(T=1.0, N=20, r=2.0)
    result = solve_graded(problem, grid, mesh)
    interior = result.u[:, 1:-1]
    psi = np.zeros(grid.M - 1)
    inverse_gamma = 1.0 / math.gamma(2.0 - alpha)
    for k in (1, 3, 19):
        diffs = graded_second_differences(interior[: k + 2], psi, mesh.nodes)
        weights = graded_coeff_table(k, alpha, mesh).weights
        rho = mesh.rho(k)
        sigma_k = mesh.offset(k, alpha)
        upper = (0.5 * rho + sigma_k) / (0.5 * (rho + 1.0))
        lower = (0.5 - sigma_k) / (0.5 * (rho + 1.0))
        lhs = inverse_gamma * (weights @ diffs[k::-1])
        rhs = (
            0.5 * upper * laplacian(interior[k + 1] + interior[k], grid.h)
            + 0.5 * lower * laplacian(interior[k] + interior[k - 1], grid.h)
            + _rhs(problem, grid, mesh.eval_point(k, alpha))
        )
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9)
    assert result.u_hat is None


def test_l2c_scheme_satisfies_discrete_equation():
    alpha = 1.4
    problem = example_51(alpha)
    grid = SpatialGrid(L=1.0, M=12)
    mesh = UniformTemporalMesh(T=1.0, N=10)
    tau = mesh.tau
    result = solve_l2c(problem, grid, mesh)
    interior = result.u[:, 1:-1]
    ghost = interior[1] - 2.0 * tau * np.zeros(grid.M - 1)
    levels = np.vstack([ghost, interior])  # levels[j] = u^{j-1}
    increments = np.diff(levels, axis=0)  # increments[l] = u^l - u^{l-1}
    scale = tau ** (-alpha) / (2.0 * math.gamma(3.0 - alpha))
    for k in (1, 2, 9):
        lhs = scale * (l2c_weights(k, alpha) @ increments[: k + 2])
        rhs = 0.25 * laplacian(interior[k + 1] + 2.0 * interior[k] + interior[k - 1], grid.h) + _rhs(problem, grid, k * tau)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-10)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_zero_data_gives_zero_fields(scheme, zero_problem):
    result = solve(zero_problem(1.5), SpatialGrid(L=1.0, M=10), 16, scheme, r=1.0 if "graded" not in scheme else 2.0)
    assert np.all(result.u == 0.0)
    assert result.u.shape == (17, 11)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_boundary_rows_are_zero(scheme):
    result = solve(example_52(1.5), SpatialGrid(L=1.0, M=10), 12, scheme, r=2.0 if "graded" in scheme else 1.0)
    assert np.all(result.u[:, 0] == 0.0) and np.all(result.u[:, -1] == 0.0)
    assert set(result.norms) == {"l2", "h1", "inf"}
    assert result.norms["inf"].shape == (13,)


def test_single_step_mesh_runs_first_step_only():
    problem = example_51(1.5)
    result = solve(problem, SpatialGrid(L=1.0, M=8), 1, "h3n3-fast")
    assert result.u.shape == (2, 9)
    assert result.soe_count is None


def test_unknown_scheme_is_rejected():
    with pytest.raises(DomainError):
        solve(example_51(1.5), SpatialGrid(L=1.0, M=8), 8, "crank-nicolson")


def test_fast_and_direct_schemes_agree():
    problem = example_51(1.5)
    grid = SpatialGrid(L=1.0, M=128)
    mesh = UniformTemporalMesh(T=1.0, N=256)
    direct = solve_uniform(problem, grid, mesh)
    fast = solve_uniform(problem, grid, mesh, fast=True, soe_epsilon=1e-12)
    assert np.max(np.abs(direct.u - fast.u)) <= 1e-9
    assert fast.soe_count > 0


def test_graded_fast_and_direct_schemes_agree():
    problem = example_52(1.5)
    grid = SpatialGrid(L=1.0, M=32)
    mesh = GradedTemporalMesh(T=1.0, N=64, r=3.0)
    direct = solve_graded(problem, grid, mesh)
    fast = solve_graded(problem, grid, mesh, fast=True, soe_epsilon=1e-12)
    assert np.max(np.abs(direct.u - fast.u)) <= 1e-8


def test_graded_scheme_with_unit_exponent_matches_uniform():
    problem = example_51(1.3)
    grid = SpatialGrid(L=1.0, M=16)
    uniform = solve_uniform(problem, grid, UniformTemporalMesh(T=1.0, N=32))
    graded = solve_graded(problem, grid, GradedTemporalMesh(T=1.0, N=32, r=1.0))
    np.testing.assert_allclose(graded.u, uniform.u, rtol=1e-9, atol=1e-13)


def test_temporal_order_is_two():
    problem = example_51(1.5)
    grid = SpatialGrid(L=1.0, M=32)
    runs = {n: solve(problem, grid, n, "h3n3-direct").u for n in (32, 64, 128, 256)}
    # self-convergence on the shared levels removes the spatial error
    gaps = [np.max(np.abs(runs[n] - runs[2 * n][::2])) for n in (32, 64, 128)]
    orders = [math.log2(a / b) for a, b in zip(gaps, gaps[1:])]
    assert 1.7 <= orders[-1] <= 2.3


def test_spatial_order_is_two():
    problem = example_51(1.5)
    errors = [solve(problem, SpatialGrid(L=1.0, M=m), 256, "h3n3-fast").max_error(problem.exact) for m in (4, 8, 16)]
    orders = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert 1.8 <= orders[-1] <= 2.2


def test_uhat_is_second_order_on_smooth_problem():
    problem = example_51(1.5)
    grid = SpatialGrid(L=1.0, M=32)
    hats = {n: solve(problem, grid, n, "h3n3-direct").u_hat for n in (32, 64, 128, 256)}
    gaps = [np.max(np.abs(hats[n] - hats[2 * n][::2])) for n in (32, 64, 128)]
    assert 1.7 <= math.log2(gaps[-2] / gaps[-1]) <= 2.3
    np.testing.assert_array_equal(hats[32][:2], solve(problem, grid, 32, "h3n3-direct").u[:2])


def test_l2c_converges_more_slowly_than_h3n3():
    problem = example_51(1.9)
    grid = SpatialGrid(L=1.0, M=32)
    runs = {scheme: {n: solve(problem, grid, n, scheme).u for n in (32, 64, 128)} for scheme in ("l2c", "h3n3-direct")}
    gap = {
        scheme: [np.max(np.abs(levels[n] - levels[2 * n][::2])) for n in (32, 64)]
        for scheme, levels in runs.items()
    }
    l2c_order = math.log2(gap["l2c"][0] / gap["l2c"][1])
    h3n3_order = math.log2(gap["h3n3-direct"][0] / gap["h3n3-direct"][1])
    assert l2c_order < h3n3_order


def test_compatibility_of_smooth_benchmark():
    report = check_compatibility(example_51(1.5), SpatialGrid(L=1.0, M=64))
    assert report.compatible
    assert report.initial_residual <= report.threshold


def test_compatibility_warns_for_weakly_regular_benchmark():
    alpha = 1.5
    report = check_compatibility(example_52(alpha), SpatialGrid(L=1.0, M=64))
    assert not report.compatible
    assert report.initial_residual == pytest.approx(math.gamma(1.0 + alpha), rel=1e-5)


def test_compatibility_of_manufactured_pair():
    problem = ProblemSpec(
        source=lambda x, t: np.pi ** 2 * np.sin(np.pi * x),
        initial_value=lambda x: np.sin(np.pi * x),
        initial_velocity=np.zeros_like,
        alpha=1.5,
    )
    assert check_compatibility(problem, SpatialGrid(L=1.0, M=64)).compatible


def test_stability_monitor():
    problem = example_51(1.5)
    grid = SpatialGrid(L=1.0, M=50)
    peaks = [float(np.max(solve(problem, grid, n, "h3n3-fast").norms["inf"])) for n in (20, 40, 80)]
    assert max(peaks) / min(peaks) < 1.05


@pytest.mark.slow
def test_stability_monitor_over_full_refinement():
    problem = example_51(1.5)
    grid = SpatialGrid(L=1.0, M=1000)
    peaks = [float(np.max(solve(problem, grid, n, "h3n3-fast").norms["inf"])) for n in (80, 160, 320, 640, 1280)]
    assert max(peaks) / min(peaks) < 1.05


def test_norms_of_zero_field():
    grid = SpatialGrid(L=1.0, M=16)
    assert norms(np.zeros(17), grid) == {"l2": 0.0, "h1": 0.0, "inf": 0.0}


def test_embedding_inequalities():
    rng = np.random.default_rng(7)
    grid = SpatialGrid(L=2.0, M=40)
    for _ in range(1000):
        field = np.zeros(grid.M + 1)
        field[1:-1] = rng.standard_normal(grid.M - 1)
        result = norms(field, grid)
        assert result["inf"] <= math.sqrt(grid.L) / 2.0 * result["h1"]
        assert result["l2"] <= grid.L / math.sqrt(6.0) * result["h1"]


def test_uhat_keeps_constant_sequences():
    v = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(uhat_postprocess(v, v, v, 0.3), v, rtol=1e-15)
