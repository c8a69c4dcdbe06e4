"""Robust test of theta = theta0 against theta != theta0 based on phi_hat_n(alpha, theta0).

The statistic is standardised by s = [int IF(y; U_alpha, P_theta0)**2 dP_theta0]**(1/2)
and the null is rejected on the closed region |Z| >= q_{1 - alpha0/2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import ndtr, ndtri

from .criterion import DualCriterion, as_sample
from .estimators import SearchBox, divergence_estimate
from .exceptions import DegenerateEscortError, DomainError
from .models import integrate
from .robustness import InfluenceProfile, Target, influence_profile


def std_normal_pdf(z):
    return np.exp(-0.5 * np.square(z)) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class TestConfig:
    """Null hypothesis, escort and nominal level of the divergence test."""

    __test__ = False  # not a pytest class

    criterion: DualCriterion
    theta0: float
    alpha0: float
    sample_size_n: int
    selection: str = "global"

    def __post_init__(self):
        if not 0.0 < self.alpha0 < 1.0:
            raise DomainError("alpha0 must lie in (0, 1)")
        if self.sample_size_n < 1:
            raise DomainError("sample size must be >= 1")
        self.criterion.model.check_theta(self.theta0)
        if self.criterion.alpha == self.theta0:
            raise DegenerateEscortError("degenerate escort: alpha equals theta0, so IF(.; U_alpha) is identically 0")

    @property
    def quantile(self) -> float:
        return float(ndtri(1.0 - self.alpha0 / 2.0))

    @cached_property
    def divergence_profile(self) -> InfluenceProfile:
        return influence_profile(self.criterion, self.theta0, Target.DIVERGENCE_U)

    @property
    def phi0(self) -> float:
        return self.divergence_profile.divergence_value

    @property
    def scale(self) -> float:
        """s = sqrt(int IF_U**2 dP_theta0)."""
        s2 = self.divergence_profile.asymptotic_variance
        if not s2 > 0:
            raise DegenerateEscortError("int IF(.; U_alpha)**2 dP_theta0 is zero")
        return math.sqrt(s2)

    @cached_property
    def c(self) -> float:
        """c = int m(theta0, alpha, y) s_theta0(y) dP_theta0(y), by quadrature."""
        crit, t0 = self.criterion, self.theta0
        m = crit.model
        return integrate(lambda y: float(crit.dual_payoff(t0, y) * m.score(t0, y) * math.exp(m.logpdf(t0, y))),
                         crit.quadrature, m.center(t0), m.spread(t0))

    def k_n(self, n: int | None = None) -> float:
        """Critical value on the phi_hat scale: s q / sqrt(n) + phi(alpha, theta0)."""
        n = self.sample_size_n if n is None else n
        return self.scale * self.quantile / math.sqrt(n) + self.phi0


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    statistic: float
    critical_value: float
    k_n: float
    reject: bool
    phi_hat: float

    def as_dict(self) -> dict:
        return {"statistic": self.statistic, "critical_value": self.critical_value,
                "k_n": self.k_n, "reject": self.reject, "phi_hat": self.phi_hat}


def decide(cfg: TestConfig, phi_hat: float, n: int) -> TestOutcome:
    z = math.sqrt(n) * (phi_hat - cfg.phi0) / cfg.scale
    q = cfg.quantile
    return TestOutcome(z, q, cfg.k_n(n), bool(abs(z) >= q), phi_hat)


def test_statistic(cfg: TestConfig, sample, box: SearchBox | None = None) -> TestOutcome:
    """Standardised divergence statistic and the two-sided decision."""
    x = as_sample(sample)
    if x.size != cfg.sample_size_n:
        raise DomainError(f"sample has {x.size} observations, config expects {cfg.sample_size_n}")
    phi_hat = divergence_estimate(cfg.criterion, x, box, cfg.selection)
    return decide(cfg, phi_hat, x.size)


test_statistic.__test__ = False


def asymptotic_power(cfg: TestConfig, delta: float, epsilon: float, x: float) -> float:
    """2 - 2 Phi(q - delta c/s - epsilon IF(x; U_alpha)/s).

    This is the limit of 2 P(phi_hat_n >= k_n) along the drifting contaminated
    alternatives; values above 1 are returned as computed.
    """
    if epsilon < 0:
        raise DomainError("epsilon must be nonnegative")
    s = cfg.scale
    shift = delta * cfg.c / s if delta != 0 else 0.0
    if epsilon != 0:
        shift += epsilon * float(cfg.divergence_profile.influence(x)) / s
    return float(2.0 * ndtr(shift - cfg.quantile))


@dataclass(frozen=True)
class LevelResult:
    exact: float
    first_order: float


def asymptotic_level(cfg: TestConfig, epsilon: float, x: float) -> LevelResult:
    """Contaminated asymptotic level and its first-order expansion in epsilon.

    The expansion of 2 - 2 Phi(q - t) is alpha0 + 2 f(q) t with
    t = epsilon IF(x; U_alpha)/s and f the standard normal density.
    """
    exact = asymptotic_power(cfg, 0.0, epsilon, x)
    t = epsilon * float(cfg.divergence_profile.influence(x)) / cfg.scale if epsilon else 0.0
    first = cfg.alpha0 + 2.0 * float(std_normal_pdf(cfg.quantile)) * t
    return LevelResult(exact, first)
