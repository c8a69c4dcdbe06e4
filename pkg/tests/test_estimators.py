import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import ndtri

from dualdiv import (CauchyLocation, DualCriterion, LogisticLocation, NormalLocation, NormalScale, PowerDivergence,
                     SearchBox, Target, divergence_estimate, dphi_estimate, influence_profile, mdpde, mdphi_estimate,
                     mle, pilot_estimate)
from dualdiv.estimators import STATIONARITY_TOL, maximize_on_grid
from dualdiv.exceptions import DomainError, EstimationError
from dualdiv.robustness import contaminated_functional

SQRT_2_3 = math.sqrt(2.0 / 3.0)


def crit(gamma, model, alpha):
    return DualCriterion(PowerDivergence(gamma), model, alpha)


def quantile_sample(n, model, theta):
    u = (np.arange(1, n + 1) - 0.5) / n
    if isinstance(model, NormalScale):
        return model.mean + theta * ndtri(u)
    return theta + ndtri(u)


def test_search_box_validation_and_defaults():
    with pytest.raises(DomainError):
        SearchBox(2.0, 1.0)
    with pytest.raises(DomainError):
        SearchBox(-1.0, 1.0).check(NormalScale())
    b = SearchBox.default(NormalScale(), 2.0)
    assert (b.lo, b.hi) == pytest.approx((0.1, 40.0))
    b = SearchBox.default(CauchyLocation(), 0.5)
    assert (b.lo, b.hi) == pytest.approx((-19.5, 20.5))
    assert SearchBox(1.0, 10.0, grid_points=7).grid(NormalScale())[[0, -1]].tolist() == [1.0, 10.0]


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.9])
def test_gamma_zero_dphi_example(alpha):
    res = dphi_estimate(crit(0.0, NormalScale(), alpha), [-1.0, 0.0, 1.0])
    assert res.estimate == pytest.approx(SQRT_2_3, abs=1e-8)
    assert res.converged


def test_mle_examples():
    assert mle(NormalScale(), [-1.0, 0.0, 1.0]).estimate == pytest.approx(0.816497, abs=1e-6)
    assert mle(NormalLocation(sigma=1.0), [1.0, 2.0, 3.0]).estimate == 2.0
    assert mle(CauchyLocation(), [0.0, 0.0, 0.0]).estimate == pytest.approx(0.0, abs=1e-9)


def test_cauchy_mle_reports_every_root_and_breaks_ties_low():
    res = mle(CauchyLocation(), [-5.0, 5.0])
    roots = sorted(t for t, _ in res.local_optima)
    assert roots == pytest.approx([-math.sqrt(24), math.sqrt(24)], abs=1e-7)
    assert res.estimate == pytest.approx(-math.sqrt(24), abs=1e-7)


def test_mle_logistic_numeric():
    x = LogisticLocation().sample(0.7, 500, 11)
    res = mle(LogisticLocation(), x)
    assert res.converged and abs(res.stationarity_residual) <= STATIONARITY_TOL


def test_maximize_on_grid_ties_and_failures():
    grid = np.linspace(-2, 2, 41)
    res = maximize_on_grid(lambda t: -(np.asarray(t) ** 2 - 1) ** 2, None, grid, 1e-10)
    assert res.estimate == pytest.approx(-1.0, abs=1e-6)
    assert len(res.local_optima) == 2
    with pytest.raises(EstimationError):
        maximize_on_grid(lambda t: np.full(np.shape(t), -np.inf), None, grid, 1e-8)


def test_maximize_on_grid_anchor_picks_nearest_local_max():
    grid = np.linspace(-2, 2, 41)
    f = lambda t: -(np.asarray(t) ** 2 - 1) ** 2 + 0.1 * np.asarray(t)  # noqa: E731
    assert maximize_on_grid(f, None, grid, 1e-10).estimate > 0
    assert maximize_on_grid(f, None, grid, 1e-10, anchor=-0.8).estimate < 0


def test_boundary_maximum_is_not_converged():
    res = maximize_on_grid(lambda t: np.asarray(t, dtype=float), lambda t: 1.0, np.linspace(0, 1, 11), 1e-8)
    assert res.estimate == 1.0 and not res.converged


def test_selection_argument_validated():
    with pytest.raises(DomainError):
        dphi_estimate(crit(-0.5, NormalScale(), 1.5), [1.0, 2.0], selection="best")


def test_pilot_estimate():
    assert pilot_estimate(CauchyLocation(), [3.0, -1.0, 10.0]) == 3.0
    x = np.array([-2.0, -1.0, 0.5, 1.0, 3.0])
    assert pilot_estimate(NormalScale(), x) == pytest.approx(1.0 / ndtri(0.75))


def test_pilot_selection_resists_gross_outliers():
    c = crit(-0.5, NormalScale(), 1.5)
    x = np.concatenate([NormalScale().sample(1.0, 98, 5), [10.0, 10.0]])
    glob = dphi_estimate(c, x)
    pilot = dphi_estimate(c, x, selection="pilot")
    assert abs(pilot.estimate - 1.0) < 0.2
    assert glob.criterion_value >= pilot.criterion_value
    assert any(abs(t - glob.estimate) < 1e-12 for t, _ in pilot.local_optima)
    assert pilot.converged


def test_reparametrisation_invariance_scale():
    x = NormalScale().sample(1.0, 60, 3)
    for k in (0.5, 3.0):
        a = dphi_estimate(crit(-0.5, NormalScale(), 1.5), x).estimate
        b = dphi_estimate(crit(-0.5, NormalScale(), 1.5 * k), k * x).estimate / k
        assert a == pytest.approx(b, abs=1e-8)


@pytest.mark.parametrize("model", [CauchyLocation(), LogisticLocation(), NormalLocation(sigma=1.0)])
def test_shift_equivariance_location(model):
    x = model.sample(0.0, 40, 8)
    c0 = crit(1.0, model, 0.4)
    base = dphi_estimate(c0, x, SearchBox(-10.0, 10.0)).estimate
    for s in (-2.5, 7.0):
        moved = dphi_estimate(crit(1.0, model, 0.4 + s), x + s, SearchBox(-10.0 + s, 10.0 + s)).estimate
        assert moved - s == pytest.approx(base, abs=1e-8)


@given(seed=st.integers(0, 2**32 - 1), gamma=st.sampled_from([-1.0, -0.5, 0.5, 1.0, 2.0]))
def test_converged_estimates_are_stationary(seed, gamma):
    model = NormalScale()
    x = model.sample(1.0, 30, seed)
    res = dphi_estimate(crit(gamma, model, 1.3), x)
    if res.converged:
        assert abs(res.stationarity_residual) <= STATIONARITY_TOL
        assert 1.3 * 0.05 < res.estimate < 1.3 * 20


@pytest.mark.parametrize("c, theta0", [(crit(-0.5, NormalScale(), 1.5), 1.0), (crit(2.0, CauchyLocation(), 0.8), 0.5)])
def test_consistency_at_large_n(c, theta0):
    n = 10_000
    x = c.model.sample(theta0, n, 99)
    sd = math.sqrt(influence_profile(c, theta0, Target.ESTIMATOR_T).asymptotic_variance)
    res = dphi_estimate(c, x)
    assert res.converged
    assert abs(res.estimate - theta0) <= 3 * sd / math.sqrt(n)


def test_divergence_estimate_law_of_large_numbers():
    c, theta0, n = crit(2.0, CauchyLocation(), 0.8), 0.5, 10_000
    x = c.model.sample(theta0, n, 7)
    prof = influence_profile(c, theta0, Target.DIVERGENCE_U)
    phi_hat = divergence_estimate(c, x)
    assert abs(phi_hat - prof.divergence_value) <= 3 * math.sqrt(prof.asymptotic_variance / n)


def test_divergence_estimate_zero_when_escort_is_the_maximiser():
    # gamma = 0: the maximiser is the MLE; placing alpha there gives phi_hat = 0
    x = np.array([-1.0, 0.0, 1.0])
    assert divergence_estimate(crit(0.0, NormalScale(), SQRT_2_3), x) == pytest.approx(0.0, abs=1e-14)


def test_divergence_estimate_is_not_clamped():
    # with alpha at the gamma=0 estimate and gamma != 0 nothing forces a sign; the raw value comes back
    x = np.array([-1.0, 0.0, 1.0, 4.0])
    a = mle(NormalScale(), x).estimate
    c = crit(2.0, NormalScale(), a)
    assert divergence_estimate(c, x) == dphi_estimate(c, x).criterion_value


def test_mdphi_gamma_zero_is_mle():
    x = np.array([-1.0, 0.3, 2.0, 0.5])
    res = mdphi_estimate(PowerDivergence(0.0), NormalScale(), x)
    assert res.estimate == pytest.approx(mle(NormalScale(), x).estimate, abs=1e-6)
    assert res.converged


def test_mdphi_degenerate_single_point():
    res = mdphi_estimate(PowerDivergence(1.0), CauchyLocation(), [1.0])
    assert not res.converged and math.isnan(res.estimate)


@pytest.mark.slow
def test_mdphi_fisher_consistency():
    x = quantile_sample(10_000, NormalScale(), 1.0)
    res = mdphi_estimate(PowerDivergence(-0.5), NormalScale(), x, SearchBox(0.5, 2.0), outer_points=30)
    assert res.estimate == pytest.approx(1.0, abs=3 / math.sqrt(2 * 10_000))


def test_mdpde_small_beta_tracks_mle():
    x = NormalScale().sample(1.0, 100, 21)
    assert mdpde(NormalScale(), 1e-4, x).estimate == pytest.approx(mle(NormalScale(), x).estimate, abs=1e-3)


@pytest.mark.parametrize("beta", [0.1, 0.5, 1.0])
def test_mdpde_fisher_consistency(beta):
    x = quantile_sample(10_000, NormalScale(), 1.0)
    res = mdpde(NormalScale(), beta, x)
    assert res.converged
    assert res.estimate == pytest.approx(1.0, abs=3e-3)


def test_mdpde_normal_scale_integrals_match_quadrature():
    from dualdiv.estimators import _dpd_quad, dpd_integrals
    for beta, th in [(0.1, 0.8), (0.5, 1.7)]:
        np.testing.assert_allclose(dpd_integrals(NormalScale(), beta, th), _dpd_quad(NormalScale(), beta, th),
                                   rtol=1e-9)


def test_mdpde_location_models():
    x = CauchyLocation().sample(2.0, 400, 4)
    res = mdpde(CauchyLocation(), 0.5, x)
    assert res.converged and abs(res.estimate - 2.0) < 0.3


def test_mdpde_errors():
    with pytest.raises(DomainError):
        mdpde(NormalScale(), 0.0, [1.0, 2.0])
    with pytest.raises(EstimationError):
        mdpde(NormalScale(), 0.1, [1.0, -1.0], SearchBox(5.0, 10.0))


@pytest.mark.slow
def test_contamination_drift_root_n_rate():
    c, theta0, eps, point = crit(-0.5, NormalScale(), 1.5), 1.0, 1.0, 3.0
    from dualdiv.harness import Mixture, draw_contaminated
    sizes = [100, 1000, 10_000]
    errs = []
    for n in sizes:
        target = contaminated_functional(c, theta0, eps / math.sqrt(n), point)
        d = [dphi_estimate(c, draw_contaminated(c.model, theta0, Mixture(eps, point), n, 1000 + r),
                           selection="pilot").estimate - target for r in range(60)]
        errs.append(math.sqrt(np.mean(np.square(d))))
    slope = np.polyfit(np.log(sizes), np.log(errs), 1)[0]
    assert -0.6 <= slope <= -0.4
