"""Influence functions, gross-error sensitivity and efficiency.

Three functionals are covered: the dual estimator T_alpha, the divergence
functional U_alpha and the minimiser V (whose influence function is the
likelihood one).  For the Cressie-Read family the estimator's influence
function is

    IF(x; T_alpha, P_theta0) = S**-1 [r(x)**gamma s(x) - int r**gamma s dP_theta0],
    S = int r**gamma s**2 dP_theta0,   r = p_alpha/p_theta0,

and the asymptotic variance is the sandwich  int IF**2 dP_theta0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .criterion import DualCriterion, _signed_exp
from .exceptions import DomainError, EstimationError
from .models import CauchyLocation, LogisticLocation, NormalLocation, NormalScale, ParametricModel, integrate


class Target(str, enum.Enum):
    ESTIMATOR_T = "EstimatorT"
    DIVERGENCE_U = "DivergenceU"
    MINIMIZER_V = "MinimizerV"


class Boundedness(str, enum.Enum):
    BOUNDED = "bounded"
    UNBOUNDED = "unbounded"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class GrossErrorSensitivity:
    value: float  # +inf when unbounded
    classification: Boundedness
    tail_values: tuple  # |IF| at centre -/+ 1e3..1e6

    @property
    def b_robust(self) -> bool:
        return self.classification is Boundedness.BOUNDED


TAIL_RADII = (1e3, 1e4, 1e5, 1e6)
GROWTH_FACTOR = 2.0


def _grid_offsets(points_per_side: int = 400) -> np.ndarray:
    r = np.geomspace(1e-3, 1e6, points_per_side)
    return np.concatenate([-r[::-1], [0.0], r])


@dataclass(frozen=True)
class InfluenceProfile:
    """Population quantities behind an influence function, computed once."""

    target: Target
    criterion: DualCriterion
    theta0: float
    denominator_S: float
    numerator_const: float
    fisher_information: float
    divergence_value: float
    asymptotic_variance: float
    are: float

    @property
    def model(self) -> ParametricModel:
        return self.criterion.model

    def __call__(self, x):
        return self.influence(x)

    def influence(self, x):
        c, t0 = self.criterion, self.theta0
        if self.target is Target.MINIMIZER_V:
            out = c.model.score(t0, x) / self.fisher_information
        elif self.target is Target.ESTIMATOR_T:
            out = (c.weighted_score(t0, x) - self.numerator_const) / self.denominator_S
        else:
            out = c.dual_payoff(t0, x) - self.divergence_value
        out = np.asarray(out, dtype=float)
        return out[()] if out.ndim == 0 else out

    def gross_error_sensitivity(self, points_per_side: int = 400) -> GrossErrorSensitivity:
        return gross_error_sensitivity(self, points_per_side)


def _s_and_k1(c: DualCriterion, theta0: float):
    """(S, K1) at theta0, in log space."""
    m, g = c.model, c.gamma
    if not m.tilted_integrable(c.alpha, theta0, g):
        raise DomainError("S diverges: p_alpha**gamma p_theta0**(1-gamma) s**2 is not integrable")
    lw = lambda x: g * (m.logpdf(c.alpha, x) - m.logpdf(theta0, x)) + m.logpdf(theta0, x)  # noqa: E731
    cen, sc, q = m.center(theta0), m.spread(theta0), c.quadrature
    S = integrate(lambda x: float(_signed_exp(lw(x), m.score(theta0, x) ** 2)), q, cen, sc)
    K1 = integrate(lambda x: float(_signed_exp(lw(x), m.score(theta0, x))), q, cen, sc)
    return S, K1


def _second_moment_weighted_score(c: DualCriterion, theta0: float) -> float:
    """int r**(2 gamma) s**2 dP_theta0 (inf when divergent)."""
    m, g = c.model, c.gamma
    if not m.tilted_integrable(c.alpha, theta0, 2.0 * g):
        return math.inf
    lw = lambda x: 2.0 * g * (m.logpdf(c.alpha, x) - m.logpdf(theta0, x)) + m.logpdf(theta0, x)  # noqa: E731
    return integrate(lambda x: float(_signed_exp(lw(x), m.score(theta0, x) ** 2)),
                     c.quadrature, m.center(theta0), m.spread(theta0))


def _divergence_if_second_moment(c: DualCriterion, theta0: float, phi_val: float) -> float:
    """int (m(theta0, alpha, x) - phi)**2 dP_theta0."""
    m, g = c.model, c.gamma
    I0 = float(c.integral_term(theta0))
    lp0 = lambda x: m.logpdf(theta0, x)  # noqa: E731
    lr = lambda x: m.logpdf(c.alpha, x) - m.logpdf(theta0, x)  # noqa: E731
    if c.divergence.is_kl_modified:
        A = I0 - phi_val
        f = lambda x: (A - lr(x)) ** 2 * math.exp(lp0(x))  # noqa: E731
    else:
        if not m.tilted_integrable(c.alpha, theta0, 2.0 * g):
            return math.inf
        # m - phi = A - r**gamma/gamma, expanded so every term is formed in log space
        A = I0 - phi_val + 1.0 / g

        def f(x):
            p0 = math.exp(lp0(x))
            t1 = math.exp(g * lr(x) + lp0(x))
            t2 = math.exp(2.0 * g * lr(x) + lp0(x))
            return A * A * p0 - 2.0 * A * t1 / g + t2 / (g * g)
    return integrate(f, c.quadrature, m.center(theta0), m.spread(theta0))


def influence_profile(c: DualCriterion, theta0: float, target: Target | str = Target.ESTIMATOR_T
                      ) -> InfluenceProfile:
    """Compute S, the numerator constant, variance and ARE for one functional."""
    target = Target(target)
    m = c.model
    m.check_theta(theta0)
    info = m.fisher_information(theta0, c.quadrature)
    if target is Target.MINIMIZER_V:
        return InfluenceProfile(target, c, theta0, info, 0.0, info, 0.0, 1.0 / info, 1.0)
    if target is Target.ESTIMATOR_T:
        S, K1 = _s_and_k1(c, theta0)
        if not S > 0:
            raise DomainError(f"S must be positive, got {S}")
        second = _second_moment_weighted_score(c, theta0)
        var = (second - K1 * K1) / S**2
        are = (1.0 / info) / var if var > 0 else float("nan")
        return InfluenceProfile(target, c, theta0, S, K1, info, float("nan"), var, are)
    phi_val = c.population_divergence(theta0)
    if not math.isfinite(phi_val):
        raise DomainError("phi(alpha, theta0) is infinite")
    const = float(c.integral_term(theta0)) - phi_val
    var = _divergence_if_second_moment(c, theta0, phi_val)
    return InfluenceProfile(target, c, theta0, float("nan"), const, info, phi_val, var, float("nan"))


def if_estimator(c: DualCriterion, theta0: float, x):
    """IF(x; T_alpha, P_theta0)."""
    return influence_profile(c, theta0, Target.ESTIMATOR_T).influence(x)


def if_divergence(c: DualCriterion, theta0: float, x):
    """IF(x; U_alpha, P_theta0) = m(theta0, alpha, x) - phi(alpha, theta0)."""
    return influence_profile(c, theta0, Target.DIVERGENCE_U).influence(x)


def if_minimizer(model: ParametricModel, theta0: float, x):
    """IF(x; V, P_theta0) = I**-1 s(x), the likelihood influence function."""
    model.check_theta(theta0)
    return model.score(theta0, x) / model.fisher_information_exact(theta0)


def asymptotic_variance_and_are(profile: InfluenceProfile) -> tuple[float, float]:
    """Sandwich variance int IF**2 dP_theta0 and ARE = I**-1 / variance."""
    if profile.target is Target.DIVERGENCE_U:
        raise DomainError("ARE is defined for parameter estimators only")
    return profile.asymptotic_variance, profile.are


def _settles(v: np.ndarray) -> bool:
    d = np.abs(np.diff(v))
    return bool(np.all(d[1:] <= d[:-1] * (1 + 1e-9) + 1e-15) and d[-1] <= 1e-3 * (1.0 + v.max()))


def gross_error_sensitivity(profile: InfluenceProfile, points_per_side: int = 400) -> GrossErrorSensitivity:
    """sup_x |IF(x)| on a symmetric log grid to 1e6, with a tail classification.

    UNBOUNDED: a non-finite value, or |IF| growing by a factor >= 2 at each of
    the radii 1e3, 1e4, 1e5, 1e6 on either side.  BOUNDED: on both sides the
    tail settles (shrinking successive changes) without exceeding the
    interior supremum.  Anything else is INCONCLUSIVE.
    """
    cen = profile.model.center(profile.theta0)
    offs = _grid_offsets(points_per_side)
    with np.errstate(all="ignore"):
        vals = np.abs(profile.influence(cen + offs))
        right = np.abs(profile.influence(cen + np.asarray(TAIL_RADII)))
        left = np.abs(profile.influence(cen - np.asarray(TAIL_RADII)))
    tails = (tuple(left.tolist()), tuple(right.tolist()))
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(right)) and np.all(np.isfinite(left))):
        return GrossErrorSensitivity(math.inf, Boundedness.UNBOUNDED, tails)
    for side in (left, right):
        if np.all(side[1:] >= GROWTH_FACTOR * side[:-1]) and side[0] > 0:
            return GrossErrorSensitivity(math.inf, Boundedness.UNBOUNDED, tails)
    interior = float(vals[np.abs(offs) <= TAIL_RADII[0]].max())
    sup = float(vals.max())
    ok = all(_settles(side) and side[-1] <= interior * (1 + 1e-6) + 1e-12 for side in (left, right))
    return GrossErrorSensitivity(sup, Boundedness.BOUNDED if ok else Boundedness.INCONCLUSIVE, tails)


def b_robust_predicate(model: ParametricModel, gamma: float, alpha: float, theta0: float) -> bool:
    """Closed-form B-robustness of T_alpha for the four implemented models.

    Normal scale: the weighted score is bounded iff (gamma > 0 and alpha < theta0)
    or (gamma < 0 and alpha > theta0).  Normal location: never.  Cauchy and
    logistic location: always, since r is bounded away from 0 and infinity in
    the tails and the score is bounded.
    """
    if isinstance(model, NormalScale):
        return (gamma > 0 and alpha < theta0) or (gamma < 0 and alpha > theta0)
    if isinstance(model, NormalLocation):
        return False
    if isinstance(model, (CauchyLocation, LogisticLocation)):
        return True
    raise DomainError(f"no closed-form B-robustness table for {model!r}")


# -- contaminated functional (numerical influence function) ---------------------

def contaminated_functional(c: DualCriterion, theta0: float, epsilon: float, x: float) -> float:
    """T_alpha((1-eps) P_theta0 + eps delta_x): the root near theta0 of
    (1-eps) int m'(theta) dP_theta0 + eps m'(theta, x) = 0."""
    if not 0 <= epsilon < 1:
        raise DomainError("epsilon must lie in [0, 1)")
    m = c.model

    def eq(th):
        return (1.0 - epsilon) * c.population_dtheta(th, theta0) + epsilon * float(c.dual_payoff_dtheta(th, x))

    if epsilon == 0:
        return float(theta0)
    h = 1e-3 * m.spread(theta0)
    f0 = eq(theta0)
    for _ in range(40):
        lo, hi = theta0 - h, theta0 + h
        if m.kind == "scale":
            lo = max(lo, 0.5 * theta0)
        flo, fhi = eq(lo), eq(hi)
        if np.sign(flo) != np.sign(fhi):
            return float(optimize.brentq(eq, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
        h *= 2.0
    raise EstimationError(f"no root of the contaminated equation near theta0 (f(theta0)={f0})")


def numeric_influence(c: DualCriterion, theta0: float, x: float, epsilon: float = 1e-3) -> float:
    """Richardson-extrapolated contamination derivative of T_alpha at x."""
    d1 = (contaminated_functional(c, theta0, epsilon, x) - theta0) / epsilon
    d2 = (contaminated_functional(c, theta0, epsilon / 2, x) - theta0) / (epsilon / 2)
    return 2.0 * d2 - d1


__all__ = [
    "Target", "Boundedness", "GrossErrorSensitivity", "InfluenceProfile", "influence_profile",
    "if_estimator", "if_divergence", "if_minimizer", "asymptotic_variance_and_are",
    "gross_error_sensitivity", "b_robust_predicate", "contaminated_functional", "numeric_influence",
]
