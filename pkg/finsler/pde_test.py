import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import sparse

from .errors import (ConfigValidationError, DivergentIntegralError, NegativeInputError,
                     NonconvexDetectedError, NotStabilizedError)
from .geometry import Domain2D
from .nonlinearity import PowerNonlinearity, PowerSumNonlinearity, ko_profile
from .norms import EuclideanNorm, LinearMapNorm, QNorm
from .pde import (QUADRATIC, TRIGONOMETRIC, DirichletProblem, DiscreteField, DiscreteGrid, _newton,
                  barrier_bounds, boundary_asym_check, build_grid, convergence_study, energy_J,
                  energy_parts, monotone_large_solution, phi_many, solve_dirichlet, uniqueness_check)
from .radial import solve_ball_large, solve_omega

CUBIC = PowerNonlinearity(3.0, 2.0)
H = 1.0 / 16


@pytest.fixture(scope="module")
def disk_problem():
    return DirichletProblem(Domain2D.disk(), EuclideanNorm(2), CUBIC)


@pytest.fixture(scope="module")
def disk_grid(disk_problem):
    return build_grid(disk_problem.distance_field, H)


def node(grid, x, y):
    return int(np.argmin(np.linalg.norm(grid.points - np.array([x, y]), axis=1)))


def test_problem_validation():
    with pytest.raises(ConfigValidationError):
        DirichletProblem(Domain2D.disk(), EuclideanNorm(3), CUBIC)
    with pytest.raises(ConfigValidationError):
        DirichletProblem(Domain2D.disk(), QNorm(q=4.0, n=2), CUBIC)
    with pytest.raises(NegativeInputError):
        DirichletProblem(Domain2D.disk(), EuclideanNorm(2), CUBIC, g=-1.0)


def test_grid_too_coarse(disk_problem):
    with pytest.raises(ConfigValidationError):
        build_grid(disk_problem.distance_field, 0.2)


def test_grid_layer(disk_grid):
    assert disk_grid.layer == pytest.approx(3.0 * H)
    assert np.all(disk_grid.deltas[disk_grid.free] >= disk_grid.layer)
    assert 0 < disk_grid.free_count < disk_grid.size


def test_grid_has_no_nodes_on_boundary(disk_grid):
    # h = 1/16 的网格经过 (±1, 0) 与 (0, ±1)
    radii = np.linalg.norm(disk_grid.points, axis=1)
    assert np.all(disk_grid.deltas > 0)
    assert not np.any(np.isclose(radii, 1.0, rtol=0.0, atol=1e-12))


def test_zero_data_gives_zero_solution(disk_problem, disk_grid):
    field = solve_dirichlet(disk_problem, H, grid=disk_grid)
    assert np.all(field.values == 0.0)
    assert field.energy == 0.0


def test_constant_field_energy(disk_problem):
    h = 1.0 / 32
    grid = build_grid(disk_problem.distance_field, h)
    field = DiscreteField(grid, np.full(grid.size, 2.0), 0.0)
    gradient_term, potential = energy_parts(disk_problem, field)
    assert gradient_term == 0.0
    # |Ω|·c^{q+1}/(q+1)
    assert potential == pytest.approx(math.pi * 4.0, rel=1e-2)
    assert energy_J(disk_problem, field) == pytest.approx(potential)


def test_linear_field_gradient_term(disk_problem):
    grid = DiscreteGrid.rectangle(0.0, 0.0, 1.0, 1.0, 1.0 / 20)
    field = DiscreteField(grid, grid.points[:, 0].copy(), 0.0)
    gradient_term, potential = energy_parts(disk_problem, field)
    assert gradient_term == pytest.approx(0.5, rel=1e-12)
    assert potential == pytest.approx(0.05, rel=1e-2)


def test_comparison_in_boundary_data(disk_problem, disk_grid):
    low = solve_dirichlet(disk_problem.with_data(10.0), H, grid=disk_grid)
    high = solve_dirichlet(disk_problem.with_data(20.0), H, grid=disk_grid)
    assert low.k == 10.0
    assert np.all(high.values >= low.values - 1e-8)
    assert low.residual <= 1e-8


def test_disk_solution_is_symmetric(disk_problem, disk_grid):
    field = solve_dirichlet(disk_problem.with_data(5.0), H, grid=disk_grid)
    samples = [field.values[node(disk_grid, x, y)] for x, y in ((0.5, 0.0), (0.0, 0.5), (-0.5, 0.0), (0.0, -0.5))]
    assert np.allclose(samples, samples[0], rtol=1e-6)
    centre = field.values[node(disk_grid, 0.0, 0.0)]
    assert 0.0 < centre < samples[0]


def test_minimizer_independent_of_initial_guess(disk_problem, disk_grid):
    rng = np.random.default_rng(11)
    prob = disk_problem.with_data(2.0)
    first = solve_dirichlet(prob, H, initial=rng.uniform(0.0, 4.0, disk_grid.size), grid=disk_grid)
    second = solve_dirichlet(prob, H, initial=rng.uniform(0.0, 4.0, disk_grid.size), grid=disk_grid)
    assert np.max(np.abs(first.values - second.values)) <= 1e-6


def test_initial_guess_shape_is_checked(disk_problem, disk_grid):
    with pytest.raises(ValueError):
        solve_dirichlet(disk_problem.with_data(1.0), H, initial=np.zeros(3), grid=disk_grid)


def test_quadratic_manufactured_solution_is_exact():
    field = solve_dirichlet(QUADRATIC.problem(), H)
    free = field.grid.free
    error = np.max(np.abs(field.values[free] - QUADRATIC.exact(field.grid.points[free])))
    assert error <= 1e-8


def test_convergence_order():
    report = convergence_study((1 / 16, 1 / 32, 1 / 64), TRIGONOMETRIC)
    assert report.order >= 1.7
    assert report.errors[0] > report.errors[-1]
    assert report.to_dict()["solution"] == "trigonometric"


def test_newton_rejects_ascent_direction():
    energy = SimpleNamespace(
        grid=SimpleNamespace(free=np.array([True]), weights=np.ones(1)),
        eps=0.0,
        nl=CUBIC,
        source=np.zeros(1),
        value=lambda u: u[0] - 0.5 * u[0] ** 2,
        gradient=lambda u: np.array([1.0 - u[0]]),
        hessian=lambda u: sparse.csr_matrix([[-1.0]]),
    )
    with pytest.raises(NonconvexDetectedError):
        _newton(energy, np.zeros(1), 1e-8, 10, strict=True)


def test_phi_many_matches_closed_form():
    assert phi_many(ko_profile(CUBIC), np.array([0.1]))[0] == pytest.approx(10.0 * math.sqrt(2.0))


def test_barrier_bounds():
    unit = solve_omega(1.0, 2.0, CUBIC).evaluate(0.5)
    bounds = barrier_bounds(CUBIC, [1.0, 0.5])
    assert bounds[0] == pytest.approx(unit)
    # ω_R(R/2) = R^{−p/(q+1−p)} ω_1(1/2)
    assert bounds[1] == pytest.approx(2.0 * unit)
    mixed = barrier_bounds(PowerSumNonlinearity([[1.0, 1.0], [1.0, 3.0]]), [0.2, 0.4, 0.8])
    assert np.all(np.diff(mixed) <= 0)


def test_monotone_sequence(disk_problem):
    sol = monotone_large_solution(disk_problem, H)
    assert sol.interior_converged
    assert sol.ks[:3] == [1.0, 2.0, 4.0]
    assert sol.is_increasing()
    assert np.all(sol.limit.values >= sol.fields_by_k[0][1].values)


def test_monotone_sequence_truncated_by_k_max(disk_problem):
    with pytest.raises(NotStabilizedError) as info:
        monotone_large_solution(disk_problem, H, k_max=2.0)
    assert info.value.best.ks == [1.0, 2.0]
    assert not info.value.best.interior_converged
    with pytest.raises(ConfigValidationError):
        monotone_large_solution(disk_problem, H, k_max=0.5)


def test_monotone_requires_ko():
    prob = DirichletProblem(Domain2D.disk(), EuclideanNorm(2), PowerNonlinearity(1.0, 2.0))
    with pytest.raises(DivergentIntegralError):
        monotone_large_solution(prob, H)


def test_uniqueness_order_validation(disk_problem):
    with pytest.raises(ConfigValidationError):
        uniqueness_check(disk_problem, H, order=("monotone", "monotone"))
    sublinear = DirichletProblem(Domain2D.disk(), EuclideanNorm(2), PowerNonlinearity(0.5, 2.0))
    with pytest.raises(ConfigValidationError):
        uniqueness_check(sublinear, H)


@pytest.mark.slow
def test_disk_matches_radial_ball(disk_problem):
    sol = monotone_large_solution(disk_problem, 1.0 / 64)
    ball = solve_ball_large(1.0, 2, 2.0, CUBIC)
    grid = sol.limit.grid
    mask = grid.free & (grid.deltas > 0.2)
    radii = np.linalg.norm(grid.points[mask], axis=1)
    reference = ball(radii)
    assert np.max(np.abs(sol.limit.values[mask] - reference)) / np.max(reference) <= 0.02


@pytest.mark.slow
def test_disk_boundary_band(disk_problem):
    sol = monotone_large_solution(disk_problem, 1.0 / 128)
    [band] = boundary_asym_check(sol, disk_problem.distance_field, [(0.05, 0.1)])
    assert band.resolved and band.count > 0
    assert 0.85 <= band.min_ratio and band.max_ratio <= 1.15


@pytest.mark.slow
def test_anisotropic_ellipse_band():
    prob = DirichletProblem(Domain2D.ellipse(1.0, 0.6), LinearMapNorm(A=np.diag([2.0, 1.0])), CUBIC)
    sol = monotone_large_solution(prob, 1.0 / 128)
    [band] = boundary_asym_check(sol, prob.distance_field, [(0.05, 0.1)])
    assert 0.85 <= band.median_ratio <= 1.15
    assert abs(band.median_ratio - 1.0) < abs(band.median_ratio_euclidean - 1.0)


@pytest.mark.slow
def test_uniqueness_of_large_solution(disk_problem):
    report = uniqueness_check(disk_problem, 1.0 / 64)
    assert report.passed
    swapped = uniqueness_check(disk_problem, 1.0 / 64, order=("shrinking", "monotone"))
    assert swapped.interior_sup_difference == pytest.approx(report.interior_sup_difference, abs=1e-12)
    assert swapped.tube_sup_deviation == pytest.approx(report.tube_sup_deviation, abs=1e-12)
