import json
import math

import numpy as np
import pytest

from .errors import ConfigValidationError, DivergentIntegralError, NegativeInputError, NonpositiveInputError
from .nonlinearity import (KOProfile, OsgoodClass, PowerNonlinearity, PowerSumNonlinearity,
                           TabulatedNonlinearity, classify_osgood, keller_integral, ko_constant, ko_profile,
                           ko_report, ko_tail_test, nonlinearity_from_config, phi, primitive_F, psi,
                           psi_at_zero, _phi_numeric)

KO_GRID = [(p, q) for p in (2.0, 2.5, 3.0, 4.0) for q in (p - 1.2, p - 1.0, p - 0.8, 2.0 * p)]


def test_p_below_two_is_rejected():
    with pytest.raises(ConfigValidationError):
        PowerNonlinearity(3.0, 1.5)


@pytest.mark.parametrize("p,q", KO_GRID)
def test_ko_rule_for_powers(p, q):
    assert PowerNonlinearity(q, p).ko_holds == (q > p - 1.0)


def test_psi_values():
    assert psi(PowerNonlinearity(3.0, 2.0), 2.0) == pytest.approx(0.7071068, rel=1e-6)
    assert psi(PowerNonlinearity(5.0, 3.0), 1.0) == pytest.approx(4.0 ** (1.0 / 3.0), rel=1e-8)


@pytest.mark.parametrize("p,q", [(2.0, 3.0), (2.0, 1.5), (3.0, 5.0), (4.0, 8.0)])
def test_psi_matches_closed_form(p, q):
    nl = PowerNonlinearity(q, p)
    K, a = nl.psi_constant()
    for r in (0.05, 1.0, 30.0):
        assert psi(nl, r) == pytest.approx(K * r ** (-a), rel=1e-8)


def test_psi_is_infinite_without_ko():
    nl = PowerNonlinearity(1.0, 2.0)
    assert psi(nl, 1.0) == math.inf
    assert keller_integral(nl, 0.0, 1.0) == math.inf


def test_psi_rejects_nonpositive_argument():
    with pytest.raises(NonpositiveInputError):
        psi(PowerNonlinearity(3.0), 0.0)
    with pytest.raises(NegativeInputError):
        primitive_F(PowerNonlinearity(3.0), -1.0)


def test_psi_strictly_decreasing_for_power_sum():
    nl = PowerSumNonlinearity([[1.0, 0.5], [1.0, 3.0]])
    values = [psi(nl, r) for r in np.geomspace(0.01, 100.0, 12)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_phi_inverts_psi():
    for nl in (PowerNonlinearity(3.0), PowerSumNonlinearity([[1.0, 1.0], [2.0, 2.0]])):
        profile = ko_profile(nl)
        for r in (0.1, 1.0, 10.0):
            assert phi(profile, psi(nl, r)) == pytest.approx(r, rel=1e-6)


def test_phi_closed_form_example():
    assert phi(ko_profile(PowerNonlinearity(3.0)), 0.1) == pytest.approx(10.0 * math.sqrt(2.0))


def test_phi_without_ko_raises():
    with pytest.raises(DivergentIntegralError):
        phi(KOProfile(PowerNonlinearity(0.5)), 1.0)


def test_osgood_power_is_a1():
    result = classify_osgood(PowerNonlinearity(3.0))
    assert result.osgood == OsgoodClass.A1_DIVERGES
    assert result.L is None
    assert psi_at_zero(PowerNonlinearity(3.0)) == math.inf


def test_osgood_sublinear_sum_is_a2():
    nl = PowerSumNonlinearity([[1.0, 0.5], [1.0, 3.0]])
    result = classify_osgood(nl)
    assert result.osgood == OsgoodClass.A2_CONVERGES
    assert result.L == pytest.approx(psi_at_zero(nl), rel=1e-8)
    assert result.L_for(2.0) == pytest.approx(2.0 * result.L)
    profile = ko_profile(nl)
    assert profile.L == pytest.approx(result.L)
    # L 存在时 Φ 只定义在 (0, L) 上
    assert phi(profile, 0.5 * profile.L) > 0.0


def test_tabulated_cube_primitive():
    t = np.linspace(0.0, 4.0, 8001)
    nl = TabulatedNonlinearity(np.column_stack([t, t ** 3]))
    assert float(nl.F(2.0)) == pytest.approx(4.0, rel=1e-5)
    assert nl.beta == pytest.approx(3.0, rel=1e-3)
    assert nl.ko_holds
    assert nl.grows_unbounded


def test_tabulated_validation():
    with pytest.raises(ConfigValidationError):
        TabulatedNonlinearity([[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ConfigValidationError):
        TabulatedNonlinearity([[0.0, 0.0], [1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ConfigValidationError):
        TabulatedNonlinearity([[0.5, 0.0], [1.0, 1.0], [2.0, 2.0]])


def test_f_is_odd_and_F_even():
    nl = PowerNonlinearity(3.0)
    assert float(nl.f(-2.0)) == pytest.approx(-8.0)
    assert float(nl.F(-2.0)) == pytest.approx(float(nl.F(2.0)))


def test_from_config():
    nl = nonlinearity_from_config({"kind": "power", "q": 3}, p=3.0)
    assert isinstance(nl, PowerNonlinearity) and nl.p == 3.0
    nl = nonlinearity_from_config({"kind": "power_sum", "terms": [[1, 3], [2, 1]], "p": 2.5})
    assert nl.p == 2.5 and nl.tail_exponent == 4.0
    with pytest.raises(ConfigValidationError):
        nonlinearity_from_config({"kind": "exp"})
    with pytest.raises(ConfigValidationError):
        nonlinearity_from_config({"kind": "power"})


def test_ko_report_without_ko():
    report = ko_report(PowerNonlinearity(1.0, 2.0))
    assert report["ko_holds"] is False
    assert report["osgood"] == OsgoodClass.A1_DIVERGES.value
    assert "psi_samples" not in report
    json.dumps(report)


def test_ko_report_with_ko():
    report = ko_report(PowerNonlinearity(3.0, 2.0))
    assert report["ko_holds"] is True
    assert report["psi_closed_form"] is True
    assert report["psi_samples"]["1.0"] == pytest.approx(math.sqrt(2.0))


def test_ko_constant():
    assert ko_constant(2.0) == pytest.approx(math.sqrt(0.5))


def test_numeric_phi_matches_closed_form():
    nl = PowerNonlinearity(5.0, 3.0)
    K, a = nl.psi_constant()
    assert _phi_numeric(nl, 0.5, psi_at_zero(nl)) == pytest.approx((K / 0.5) ** (1.0 / a), rel=1e-6)


@pytest.mark.parametrize("exponent,holds", [(3.0, True), (1.2, True), (1.0, False), (0.9, False)])
def test_tabulated_ko_uses_tail_doubling(exponent, holds):
    t = np.linspace(0.0, 10.0, 41)
    nl = TabulatedNonlinearity(np.column_stack([t, t ** exponent]))
    assert nl.ko_holds is holds
    assert ko_tail_test(nl, 10.0) is holds
    assert ko_tail_test(PowerNonlinearity(exponent, 2.0)) is PowerNonlinearity(exponent, 2.0).ko_holds


def test_tail_doubling_rejects_nonpositive_start():
    with pytest.raises(NonpositiveInputError):
        ko_tail_test(PowerNonlinearity(3.0, 2.0), 0.0)
