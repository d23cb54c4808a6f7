import json
import math

import numpy as np
import pytest

from .errors import InvalidNormError, ZeroVectorError
from .norms import (BlockPQNorm, DualEvaluator, EuclideanNorm, LambdaMuNorm, LinearMapNorm, QNorm,
                    RandersNorm, Scaled1DNorm, dual_H0, dual_theta_bounds, eval_H, grad_H, grad_H0,
                    hess_half_H2, norm_from_config, norm_to_config, theta_bounds, verify_minkowski)


def test_eval_examples():
    assert eval_H(EuclideanNorm(2), [3.0, 4.0]) == pytest.approx(5.0)
    assert eval_H(LinearMapNorm(A=np.diag([2.0, 1.0])), [1.0, 0.0]) == pytest.approx(2.0)
    assert eval_H(LambdaMuNorm(lam=0.0, mu=1.0), [1.0, 1.0]) == pytest.approx(math.sqrt(2.0))
    assert eval_H(Scaled1DNorm(gamma=2.0), [-3.0]) == pytest.approx(6.0)


def test_gradient_at_origin_raises():
    with pytest.raises(ZeroVectorError):
        grad_H(EuclideanNorm(2), [0.0, 0.0])
    with pytest.raises(ZeroVectorError):
        hess_half_H2(LambdaMuNorm(lam=1.0, mu=1.0), [0.0, 0.0])


def test_half_sq_gradient_vanishes_at_origin():
    norm = LambdaMuNorm(lam=1.0, mu=2.0)
    assert np.allclose(norm.half_sq_gradient(np.zeros((3, 2))), 0.0)


def test_linear_map_hessian_is_gram():
    A = np.array([[2.0, 1.0], [0.0, 1.0]])
    assert np.allclose(hess_half_H2(LinearMapNorm(A=A), [0.3, -1.2]), A.T @ A)


def test_closed_form_dual():
    dual = DualEvaluator(LinearMapNorm(A=np.diag([2.0, 1.0])))
    assert dual.has_closed_form
    assert dual_H0(dual, [1.0, 0.0]) == pytest.approx(0.5)
    assert np.allclose(grad_H0(dual, [1.0, 0.0]), [0.5, 0.0])


def test_numeric_dual_matches_euclidean():
    # λ = 0 退化为欧氏范数，但走数值路径
    dual = DualEvaluator(LambdaMuNorm(lam=0.0, mu=1.0))
    assert not dual.has_closed_form
    result = dual.evaluate([3.0, 4.0])
    assert result.value == pytest.approx(5.0, rel=1e-9)
    assert np.allclose(result.maximizer, [0.6, 0.8], atol=1e-6)
    assert not result.stalled


def test_dual_angle_table_agrees_with_pointwise():
    dual = DualEvaluator(LambdaMuNorm(lam=1.0, mu=1.0))
    rng = np.random.default_rng(3)
    X = rng.normal(size=(20, 2))
    pointwise = np.array([dual.evaluate(x).value for x in X])
    assert np.allclose(dual.value_many(X), pointwise, rtol=1e-7)


def test_dual_of_zero_is_zero():
    assert dual_H0(DualEvaluator(LambdaMuNorm()), [0.0, 0.0]) == 0.0


def test_theta_bounds():
    bounds = theta_bounds(LinearMapNorm(A=np.diag([2.0, 1.0])), sweep=2048)
    assert bounds.theta1 == pytest.approx(1.0, abs=1e-9)
    assert bounds.theta2 == pytest.approx(2.0, abs=1e-9)
    assert bounds.is_valid
    dual_bounds = dual_theta_bounds(DualEvaluator(LinearMapNorm(A=np.diag([2.0, 1.0]))), sweep=1024)
    assert dual_bounds.theta1 == pytest.approx(0.5, abs=1e-9)
    assert dual_bounds.theta2 == pytest.approx(1.0, abs=1e-9)


def test_randers_norm_rejects_large_drift():
    with pytest.raises(InvalidNormError):
        RandersNorm(T=np.array([1.2, 0.0]))


def test_randers_is_only_positively_homogeneous():
    report = verify_minkowski(RandersNorm(T=np.array([0.3, 0.1])), 200, seed=2)
    symmetry = report.check("absolute_homogeneity")
    assert symmetry.informational
    assert not symmetry.passed
    assert report.passed


VALID_NORMS = [
    EuclideanNorm(2),
    Scaled1DNorm(gamma=3.0),
    LinearMapNorm(A=np.array([[2.0, 0.5], [0.0, 1.0]])),
    LambdaMuNorm(lam=1.0, mu=1.0),
    BlockPQNorm(q=2.0, sizes=(1, 1), exponents=(2.0, 2.0), weights=(1.0, 3.0)),
    RandersNorm(T=np.array([0.3, 0.1])),
]


@pytest.mark.parametrize("norm", VALID_NORMS, ids=lambda n: n.family)
def test_valid_norms_pass_every_check(norm):
    report = verify_minkowski(norm, 1000, seed=0)
    failed = [c.name for c in report.checks if not c.passed and not c.informational]
    assert failed == []


def test_q4_norm_fails_strong_convexity():
    norm = QNorm(q=4.0, n=2)
    assert not norm.minkowski
    report = verify_minkowski(norm, 100, seed=0)
    assert not report.check("strong_convexity").passed
    assert not report.passed
    assert report.check("triangle").passed


def test_report_serializes():
    report = verify_minkowski(EuclideanNorm(2), 20, seed=5)
    data = json.loads(report.to_json())
    assert data["family"] == "euclidean"
    assert data["seed"] == 5
    assert {c["name"] for c in data["checks"]} >= {"positivity", "holder", "dual_inverse", "monotonicity_p3"}


def test_verify_rejects_zero_samples():
    with pytest.raises(ValueError):
        verify_minkowski(EuclideanNorm(2), 0)


def test_config_round_trip():
    norm = BlockPQNorm(q=2.0, sizes=(1, 1), exponents=(2.0, 2.0), weights=(1.0, 4.0))
    rebuilt = norm_from_config(norm_to_config(norm))
    X = np.random.default_rng(0).normal(size=(10, 2))
    assert np.allclose(rebuilt.value(X), norm.value(X))


def test_config_errors():
    with pytest.raises(InvalidNormError):
        norm_from_config({"family": "hexagon", "params": {}})
    with pytest.raises(InvalidNormError):
        norm_from_config({"family": "linear_map", "params": {}})
    with pytest.raises(InvalidNormError):
        norm_from_config({"family": "linear_map", "params": {"A": [[1.0, 0.0], [0.0, 1.0]]}, "dim": 3})


def test_gradient_examples():
    assert np.allclose(grad_H(RandersNorm(T=np.array([0.5, 0.0])), [1.0, 0.0]), [1.5, 0.0])
    assert np.allclose(grad_H(Scaled1DNorm(gamma=3.0), [-5.0]), [-3.0])


SMOOTH_NORMS = [n for n in VALID_NORMS if n.dim == 2] + [
    BlockPQNorm(q=3.0, sizes=(1, 1), exponents=(2.0, 2.0), weights=(1.0, 3.0)),
]


@pytest.mark.parametrize("norm", SMOOTH_NORMS, ids=lambda n: f"{n.family}-{n.params()}")
def test_gradient_matches_finite_differences(norm):
    rng = np.random.default_rng(21)
    step = 1e-6
    for x in rng.normal(size=(10, 2)):
        fd = np.array([(eval_H(norm, x + step * e) - eval_H(norm, x - step * e)) / (2.0 * step)
                       for e in np.eye(2)])
        assert np.allclose(grad_H(norm, x), fd, rtol=1e-6, atol=1e-7)


@pytest.mark.parametrize("norm", SMOOTH_NORMS[:-1], ids=lambda n: n.family)
def test_hessian_matches_finite_differences(norm):
    rng = np.random.default_rng(22)
    step = 1e-5
    for x in rng.normal(size=(10, 2)):
        fd = np.column_stack([(norm.half_sq_gradient(x + step * e) - norm.half_sq_gradient(x - step * e))
                              / (2.0 * step) for e in np.eye(2)])
        hessian = hess_half_H2(norm, x)
        assert np.allclose(hessian, hessian.T, atol=1e-8)
        assert np.allclose(hessian, fd, rtol=1e-4, atol=1e-5)


def test_block_pq_numeric_dual():
    norm = BlockPQNorm(q=3.0, sizes=(1, 1), exponents=(2.0, 2.0), weights=(1.0, 3.0))
    dual = DualEvaluator(norm)
    assert not dual.has_closed_form
    # 加权 ℓ³ 的对偶是 ‖ξ w^{-1/3}‖_{3/2}
    assert dual_H0(dual, [1.0, 1.0]) == pytest.approx((1.0 + 3.0 ** -0.5) ** (2.0 / 3.0), rel=1e-7)
    rng = np.random.default_rng(23)
    for xi in rng.normal(size=(20, 2)):
        assert eval_H(norm, grad_H0(dual, xi)) == pytest.approx(1.0, abs=1e-6)
    report = verify_minkowski(norm, 1000, seed=3, dual=dual)
    for name in ("holder", "dual_unit", "dual_inverse", "triangle", "euler"):
        assert report.check(name).passed, name
