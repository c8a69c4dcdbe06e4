import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dualdiv import (Boundedness, CauchyLocation, DualCriterion, LogisticLocation, NormalLocation, NormalScale,
                     PowerDivergence, Target, asymptotic_variance_and_are, gross_error_sensitivity, if_divergence,
                     if_estimator, if_minimizer, influence_profile)
from dualdiv.exceptions import DomainError
from dualdiv.models import integrate
from dualdiv.robustness import b_robust_predicate, contaminated_functional, numeric_influence

IF_U_AT_ZERO = -0.42264973081037423549  # mpmath


def crit(gamma, model, alpha):
    return DualCriterion(PowerDivergence(gamma), model, alpha)


PROFILE_CASES = [
    (crit(-1.0, NormalScale(), 1.9), 1.0), (crit(2.0, NormalScale(), 0.8), 1.0), (crit(0.5, NormalScale(), 1.2), 1.0),
    (crit(2.0, CauchyLocation(), 0.8), 0.5), (crit(-1.0, CauchyLocation(), 0.0), 0.5),
    (crit(1.0, LogisticLocation(), 0.3), 0.0), (crit(3.0, LogisticLocation(), -0.5), 0.0),
    (crit(1.0, NormalLocation(sigma=2.0), 0.5), 0.0),
]


def weighted_integral(prof, t0, power):
    m = prof.model

    def f(x):
        lp = float(m.logpdf(t0, x))
        if lp < -700.0:  # beyond here the integrand is below double precision for every case used
            return 0.0
        return float(prof.influence(x)) ** power * math.exp(lp)
    return integrate(f, center=m.center(t0), scale=m.spread(t0))


IDS = [f"{type(c.model).__name__}-g{c.gamma}-a{c.alpha}" for c, _ in PROFILE_CASES]


def test_if_estimator_examples():
    c = crit(-1.0, NormalScale(), 1.0)
    assert if_estimator(c, 1.0, 2.0) == pytest.approx(1.5, abs=1e-10)
    assert if_estimator(c, 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_if_estimator_tail_limit_is_the_constant_term():
    # r**gamma * s dies out in the tail; what is left is -K1/S, not zero
    c = crit(-1.0, NormalScale(), 1.9)
    prof = influence_profile(c, 1.0)
    assert abs(c.weighted_score(1.0, 100.0)) < 1e-10
    assert float(if_estimator(c, 1.0, 100.0)) == pytest.approx(-prof.numerator_const / prof.denominator_S, abs=1e-10)
    assert float(if_estimator(c, 1.0, -100.0)) == pytest.approx(float(if_estimator(c, 1.0, 100.0)), abs=1e-12)


def test_if_divergence_examples():
    c = crit(2.0, NormalScale(), 1.0)
    assert if_divergence(c, math.sqrt(2.0), 0.0) == pytest.approx(IF_U_AT_ZERO, abs=1e-9)
    np.testing.assert_allclose(if_divergence(crit(1.0, CauchyLocation(), 0.4), 0.4, np.linspace(-9, 9, 7)), 0.0,
                               atol=1e-12)


def test_if_minimizer_examples():
    assert if_minimizer(NormalScale(), 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert if_minimizer(CauchyLocation(), 0.0, 1.0) == pytest.approx(2.0, abs=1e-12)
    x = np.linspace(-7, 7, 29)
    for model, t0 in [(NormalScale(), 1.3), (LogisticLocation(), 0.2), (CauchyLocation(), -1.0)]:
        np.testing.assert_allclose(if_minimizer(model, t0, x), if_estimator(crit(1.5, model, t0), t0, x),
                                   atol=1e-9)


@pytest.mark.parametrize("c, t0", PROFILE_CASES, ids=IDS)
@pytest.mark.parametrize("target", [Target.ESTIMATOR_T, Target.DIVERGENCE_U])
def test_influence_has_mean_zero(c, t0, target):
    prof = influence_profile(c, t0, target)
    assert abs(weighted_integral(prof, t0, 1)) <= 1e-6


@pytest.mark.parametrize("c, t0", PROFILE_CASES, ids=IDS)
def test_profile_invariants(c, t0):
    prof = influence_profile(c, t0)
    assert prof.denominator_S > 0
    assert 0 < prof.are <= 1 + 1e-9
    assert prof.asymptotic_variance == pytest.approx(weighted_integral(prof, t0, 2), rel=1e-7)
    assert asymptotic_variance_and_are(prof) == (prof.asymptotic_variance, prof.are)


@pytest.mark.parametrize("model, t0", [(NormalScale(), 1.0), (CauchyLocation(), 0.5), (LogisticLocation(), 0.0)])
@pytest.mark.parametrize("gamma", [-1.0, 0.0, 2.0])
def test_are_is_one_at_escort(model, t0, gamma):
    assert influence_profile(crit(gamma, model, t0), t0).are == pytest.approx(1.0, abs=1e-9)


def test_are_undefined_for_divergence_target():
    with pytest.raises(DomainError):
        asymptotic_variance_and_are(influence_profile(crit(2.0, CauchyLocation(), 0.8), 0.5, Target.DIVERGENCE_U))


def test_efficiency_and_ges_decrease_with_abs_gamma():
    ares, ges = [], []
    for g in (0.5, 1.0, 2.0, 3.0):
        p = influence_profile(crit(g, NormalScale(), 0.99), 1.0)
        ares.append(p.are)
        ges.append(p.gross_error_sensitivity().value)
    assert ares == sorted(ares, reverse=True) and len(set(ares)) == 4
    assert ges == sorted(ges, reverse=True) and len(set(ges)) == 4
    ges_neg = [influence_profile(crit(g, NormalScale(), 1.9), 1.0).gross_error_sensitivity().value
               for g in (-0.5, -1.0, -2.0)]
    assert ges_neg == sorted(ges_neg, reverse=True)


@pytest.mark.parametrize("c, t0, expected", [
    (crit(0.0, NormalScale(), 1.0), 1.0, Boundedness.UNBOUNDED),
    (crit(-1.0, NormalScale(), 1.9), 1.0, Boundedness.BOUNDED),
    (crit(1.0, NormalScale(), 1.9), 1.0, Boundedness.UNBOUNDED),
    (crit(2.0, CauchyLocation(), 0.8), 0.5, Boundedness.BOUNDED),
    (crit(-1.0, NormalLocation(sigma=1.0), 1.0), 0.0, Boundedness.UNBOUNDED),
])
def test_gross_error_sensitivity_examples(c, t0, expected):
    ges = gross_error_sensitivity(influence_profile(c, t0))
    assert ges.classification is expected
    assert ges.b_robust == (expected is Boundedness.BOUNDED)
    assert (ges.value == math.inf) == (expected is Boundedness.UNBOUNDED)


def test_ges_value_is_sup_of_curve():
    prof = influence_profile(crit(-1.0, NormalScale(), 1.9), 1.0)
    x = np.linspace(-30, 30, 20001)
    assert prof.gross_error_sensitivity().value == pytest.approx(np.abs(prof.influence(x)).max(), rel=1e-3)


def test_b_robust_predicate_table():
    assert b_robust_predicate(NormalScale(), 1.0, 0.5, 1.0)
    assert not b_robust_predicate(NormalScale(), 1.0, 1.5, 1.0)
    assert not b_robust_predicate(NormalScale(), 0.0, 1.5, 1.0)
    assert not b_robust_predicate(NormalLocation(), -1.0, 1.0, 0.0)
    assert b_robust_predicate(CauchyLocation(), 3.0, 2.0, 0.0)


@given(x=st.floats(-5, 5), gamma=st.sampled_from([-1.0, 0.5, 2.0]))
def test_numeric_influence_matches_analytic_cauchy(x, gamma):
    c = crit(gamma, CauchyLocation(), 0.8)
    assert numeric_influence(c, 0.5, x) == pytest.approx(float(if_estimator(c, 0.5, x)), abs=1e-3)


def test_contaminated_functional_edge_cases():
    c = crit(-0.5, NormalScale(), 1.5)
    assert contaminated_functional(c, 1.0, 0.0, 3.0) == 1.0
    with pytest.raises(DomainError):
        contaminated_functional(c, 1.0, 1.0, 3.0)


def test_unknown_target_rejected():
    with pytest.raises(ValueError):
        influence_profile(crit(1.0, CauchyLocation(), 0.0), 0.5, "Nope")


def test_numeric_influence_remainder_is_second_order():
    # unbounded IF: the Richardson remainder is visible at eps=1e-3 but falls 100x per decade of eps
    c = crit(0.5, NormalLocation(), 0.5)
    exact = float(if_estimator(c, 0.0, 5.0))
    errs = [abs(numeric_influence(c, 0.0, 5.0, e) - exact) for e in (1e-3, 1e-4, 1e-5)]
    assert errs[0] / errs[1] == pytest.approx(100, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(100, rel=0.1)
    assert errs[2] < 1e-5
