import math

import numpy as np
import pytest

from .errors import DivergentIntegralError, NoRootError, NonpositiveInputError, OutOfRangeError
from .nonlinearity import PowerNonlinearity, PowerSumNonlinearity
from .ode1d import (Interval1DProblem, asym_check_1d, collar_length, ell_limits, ell_of_t, eval_solution,
                    is_convex, ode_residual_1d, residual_points, solve_interval, solve_v0)

CUBIC = PowerNonlinearity(3.0, 2.0)
SUBLINEAR_SUM = PowerSumNonlinearity([[1.0, 0.5], [1.0, 3.0]], 2.0)


def test_problem_validation():
    with pytest.raises(ValueError):
        Interval1DProblem(1.0, 0.0, 1.0, CUBIC)
    with pytest.raises(NonpositiveInputError):
        Interval1DProblem(0.0, 1.0, 0.0, CUBIC)


def test_ell_at_one_is_complete_elliptic_integral():
    # p = 2, f = u³：ℓ(1) = K(1/2)
    prob = Interval1DProblem(0.0, 1.0, 1.0, CUBIC)
    assert ell_of_t(prob, 1.0) == pytest.approx(1.854074677301372, rel=1e-9)


def test_ell_scales_with_gamma():
    base = ell_of_t(Interval1DProblem(0.0, 1.0, 1.0, CUBIC), 2.0)
    assert ell_of_t(Interval1DProblem(0.0, 1.0, 3.0, CUBIC), 2.0) == pytest.approx(3.0 * base)


def test_ell_requires_ko():
    with pytest.raises(DivergentIntegralError):
        ell_of_t(Interval1DProblem(0.0, 1.0, 1.0, PowerNonlinearity(1.0, 2.0)), 1.0)


def test_ell_limits_a1():
    limits = ell_limits(Interval1DProblem(0.0, 1.0, 1.0, CUBIC))
    assert limits["decreasing_at_infinity"]
    assert limits["small_t_behaviour"] == "unbounded"
    assert limits["L"] is None


def test_ell_limits_a2():
    limits = ell_limits(Interval1DProblem(0.0, 1.0, 1.0, SUBLINEAR_SUM))
    assert limits["small_t_behaviour"] == "converges_to_L"
    smallest = limits["small_t"][-1][1]
    assert smallest == pytest.approx(limits["L"], rel=1e-2)


def test_solve_v0_inverts_ell():
    prob = Interval1DProblem(0.0, 1.0, 1.0, CUBIC)
    v0 = solve_v0(prob, 0.5)
    assert ell_of_t(prob, v0) == pytest.approx(0.5, rel=1e-10)


def test_solve_v0_beyond_collar_has_no_root():
    prob = Interval1DProblem(0.0, 1.0, 1.0, SUBLINEAR_SUM)
    with pytest.raises(NoRootError):
        solve_v0(prob, 2.0 * collar_length(prob))


@pytest.mark.parametrize("gamma", [1.0, 2.0])
def test_boundary_ratio_tends_to_one(gamma):
    sol = solve_interval(Interval1DProblem(0.0, 1.0, gamma, CUBIC))
    rows = asym_check_1d(sol, [1e-1, 1e-2, 1e-3])
    assert 0.99 <= rows[-1].ratio_left <= 1.01
    assert 0.99 <= rows[-1].ratio_right <= 1.01
    assert rows[-1].deviation <= rows[0].deviation + 1e-12


def test_solution_is_symmetric_convex_and_blows_up():
    prob = Interval1DProblem(-1.0, 2.0, 1.0, CUBIC)
    sol = solve_interval(prob)
    assert sol.evaluate(prob.center) == pytest.approx(sol.v0)
    assert sol.evaluate(-0.5) == pytest.approx(sol.evaluate(1.5), rel=1e-10)
    assert sol.evaluate(prob.a) == math.inf
    xs = np.linspace(-0.99, 1.99, 101)
    assert is_convex(sol, xs)
    assert np.all(np.diff(sol(xs[xs >= prob.center])) > 0)


def test_evaluate_outside_interval_raises():
    sol = solve_interval(Interval1DProblem(0.0, 1.0, 1.0, CUBIC))
    with pytest.raises(OutOfRangeError):
        sol.evaluate(1.5)
    with pytest.raises(OutOfRangeError):
        asym_check_1d(sol, [0.7])


@pytest.mark.parametrize("p,q", [(2.0, 3.0), (2.0, 1.5), (3.0, 5.0), (4.0, 8.0)])
def test_ode_residual_small(p, q):
    prob = Interval1DProblem(0.0, 1.0, 1.0, PowerNonlinearity(q, p))
    residual = ode_residual_1d(solve_interval(prob), residual_points(prob, 100))
    assert residual.shape == (100,)
    assert residual.max() <= 1e-3


def test_solution_is_translation_invariant():
    shifted = solve_interval(Interval1DProblem(0.0, 2.0, 1.0, CUBIC))
    centered = solve_interval(Interval1DProblem(-1.0, 1.0, 1.0, CUBIC))
    for x in (0.05, 0.4, 1.0, 1.7, 1.99):
        assert shifted.evaluate(x) == pytest.approx(centered.evaluate(x - 1.0), rel=1e-9)


def test_ell_decays_like_power_tail():
    # p = 2, f = u³：ℓ(t) ∝ 1/t
    prob = Interval1DProblem(0.0, 1.0, 1.0, CUBIC)
    assert ell_of_t(prob, 1.0) / ell_of_t(prob, 2.0) == pytest.approx(2.0, rel=1e-6)


def test_flat_zone_for_a2():
    L = collar_length(Interval1DProblem(0.0, 1.0, 1.0, SUBLINEAR_SUM))
    prob = Interval1DProblem(0.0, 2.0 * L + 1.0, 1.0, SUBLINEAR_SUM)
    sol = solve_interval(prob)
    lo, hi = sol.flat_zone
    assert lo == pytest.approx(L)
    assert hi == pytest.approx(L + 1.0)
    assert sol.evaluate(prob.center) == 0.0
    assert np.all(np.abs(sol(np.linspace(lo, hi, 10))) <= 1e-8)
    assert sol.evaluate(0.5 * L) > 0.0
    assert sol.evaluate(0.5 * L) == pytest.approx(sol.evaluate(prob.b - 0.5 * L), rel=1e-10)


def test_narrow_a2_interval_has_positive_minimum():
    L = collar_length(Interval1DProblem(0.0, 1.0, 1.0, SUBLINEAR_SUM))
    prob = Interval1DProblem(0.0, L, 1.0, SUBLINEAR_SUM)
    sol = solve_interval(prob)
    assert sol.flat_zone is None
    assert sol.v0 > 0.0


def test_eval_solution_is_monotone_away_from_center():
    prob = Interval1DProblem(0.0, 1.0, 1.0, CUBIC)
    v0 = solve_v0(prob, 0.5)
    assert eval_solution(prob, 0.5, v0, 0.5) == v0
    values = [eval_solution(prob, 0.5, v0, x) for x in (0.6, 0.8, 0.95, 0.999)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert solve_interval(prob).evaluate(1.0) == math.inf
