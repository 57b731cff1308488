import math

import numpy as np
import pytest

from asymptotic_dirichlet import ModelManifold, profile_catalog, tail_integral
from asymptotic_dirichlet.errors import QuadratureError
from asymptotic_dirichlet.quadrature import (TailIntegral, _WG, _WK, quad_log)


def test_rule_weights_integrate_constants():
    assert np.sum(_WK) == pytest.approx(2.0, abs=1e-14)
    assert np.sum(_WG) == pytest.approx(2.0, abs=1e-14)


def test_quad_log_matches_closed_form_gaussian():
    from scipy.special import erf
    lv, le = quad_log(lambda x: -0.5 * x**2, 0.0, 6.0)
    expect = math.sqrt(math.pi / 2.0) * erf(6.0 / math.sqrt(2.0))
    assert math.exp(lv) == pytest.approx(expect, rel=1e-11)
    assert math.exp(le) < 1e-9


def test_quad_log_handles_total_underflow():
    lv, le = quad_log(lambda x: np.full_like(x, -np.inf), 0.0, 1.0)
    assert lv == -np.inf and le == -np.inf


def test_quad_log_rejects_non_finite_samples():
    with pytest.raises(QuadratureError):
        quad_log(lambda x: np.where(x > 0.5, np.inf, 0.0), 0.0, 1.0)


def test_tail_integral_closed_forms():
    euc3 = ModelManifold(3, profile_catalog("euclidean"))
    res = tail_integral(euc3, 1.0, tol=1e-9)
    assert res.converged and not res.divergent
    assert res.value == pytest.approx(1.0, abs=1e-9)
    assert res.abs_error_estimate <= 1e-9

    hyp3 = ModelManifold(3, profile_catalog("hyperbolic", alpha=1.0))
    res = tail_integral(hyp3, 1.0, tol=1e-9)
    assert res.value == pytest.approx(1.0 / math.tanh(1.0) - 1.0, abs=1e-9)


def test_tail_integral_divergence():
    euc2 = ModelManifold(2, profile_catalog("euclidean"))
    res = tail_integral(euc2, 1.0, tol=1e-9)
    assert res.divergent and not res.converged


def test_tail_integral_monotone_in_radius():
    hyp3 = ModelManifold(3, profile_catalog("hyperbolic", alpha=1.0))
    tail = TailIntegral(hyp3, tol=1e-12)
    radii = np.array([0.2, 0.7, 1.0, 2.5, 6.0, 13.0])
    vals = tail.log_at_many(radii)
    assert np.all(np.diff(vals) < 0)


def test_tail_partial_lookup_consistent_with_closed_form():
    # 1/sinh^2 integrates to coth(r) - 1 from r to infinity
    hyp3 = ModelManifold(3, profile_catalog("hyperbolic", alpha=1.0))
    tail = TailIntegral(hyp3, tol=1e-13)
    for r in (0.31, 1.0, 2.2, 5.7, 11.3):
        expect = 1.0 / math.tanh(r) - 1.0
        assert math.exp(tail.log_at(r)) == pytest.approx(expect, rel=1e-9)


def test_layer_integrand_value():
    # exp_power tail at moderate radius against a reference series:
    # the integrand exp(-x^3) over [2, inf) via mpmath once gave
    # 2.0522835916726664e-05; recompute cheaply with a fine substitution.
    xp2 = ModelManifold(2, profile_catalog("exp_power", alpha=3.0))
    tail = TailIntegral(xp2, tol=1e-15)
    # reference by dense trapezoid on exp(-x^3), x in [2, 4]
    x = np.linspace(2.0, 4.0, 400001)
    ref = np.trapezoid(np.exp(-x**3 + 8.0), x) * np.exp(-8.0)
    assert math.exp(tail.log_at(2.0)) == pytest.approx(ref, rel=1e-7)
