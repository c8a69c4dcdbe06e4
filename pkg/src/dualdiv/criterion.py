"""The dual payoff m(theta, alpha, x) and the criteria built from it.

For a Cressie-Read generator phi and escort alpha,

    m(theta, alpha, x) = int phi'(p_alpha/p_theta) dP_alpha - (r(x)**gamma - 1)/gamma,
    r = p_alpha/p_theta,

and its theta derivative is the weighted score equation

    m'(theta, alpha, x) = -int r**gamma pdot_theta dlambda + r(x)**gamma s_theta(x).

The x-free integrals are computed once per theta (closed form when the model
provides one, otherwise quadrature with a per-theta cache).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .divergence import PowerDivergence
from .exceptions import DomainError, QuadratureError
from .models import DEFAULT_QUADRATURE, ParametricModel, QuadratureSettings, integrate


def as_sample(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("sample must be nonempty")
    if not np.all(np.isfinite(x)):
        raise DomainError("sample contains non-finite values")
    return x


def empirical_measure(sample):
    """Support points and weights of the empirical measure.

    Sorting the support makes every empirical average independent of the
    order of the observations, bit for bit.
    """
    x = as_sample(sample)
    support, counts = np.unique(x, return_counts=True)
    return support, counts / x.size


def _signed_exp(log_w, factor):
    """exp(log_w) * factor without producing inf*0."""
    factor = np.asarray(factor, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.sign(factor) * np.exp(log_w + np.log(np.abs(factor)))
    return np.where(factor == 0, 0.0, out)


@dataclass(frozen=True)
class DualCriterion:
    """(divergence, model, escort) triple defining the dual payoff."""

    divergence: PowerDivergence
    model: ParametricModel
    alpha: float
    quadrature: QuadratureSettings = DEFAULT_QUADRATURE
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False,
                                  compare=False, hash=False)

    def __post_init__(self):
        self.model.check_theta(self.alpha)

    def __reduce__(self):
        # the cache and its lock stay behind; workers rebuild their own
        return (type(self), (self.divergence, self.model, self.alpha, self.quadrature))

    @property
    def gamma(self) -> float:
        return self.divergence.gamma

    # -- x-free terms ------------------------------------------------------
    def _log_ratio(self, theta, x):
        return self.model.logpdf(self.alpha, x) - self.model.logpdf(theta, x)

    def _quad_terms(self, theta: float):
        key = float(theta)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        m, a, g = self.model, self.alpha, self.gamma
        if not m.tilted_integrable(a, theta, g):
            out = (np.inf, np.nan, np.nan)
        else:
            lw = lambda x: g * m.logpdf(a, x) + (1.0 - g) * m.logpdf(theta, x)  # noqa: E731
            c, s, q = m.center(theta), m.spread(theta), self.quadrature
            try:
                J = integrate(lambda x: math.exp(lw(x)), q, c, s)
                K1 = integrate(lambda x: _signed_exp(lw(x), m.score(theta, x)), q, c, s)
                K2 = integrate(lambda x: _signed_exp(
                    lw(x), (1.0 - g) * m.score(theta, x) ** 2 + m.dscore(theta, x)), q, c, s)
            except QuadratureError:
                out = (np.inf, np.nan, np.nan)
            else:
                out = (J, K1, K2)
        with self._lock:
            self._cache[key] = out
        return out

    def tilted_terms(self, theta):
        """(J, K1, K2) at theta; see :meth:`ParametricModel.tilted_terms`."""
        closed = self.model.tilted_terms(self.alpha, theta, self.gamma)
        if closed is not None:
            return closed
        th = np.asarray(theta, dtype=float)
        if th.ndim == 0:
            return self._quad_terms(float(th))
        rows = np.array([self._quad_terms(float(t)) for t in th.ravel()])
        return tuple(rows[:, k].reshape(th.shape) for k in range(3))

    def integral_term(self, theta):
        """int phi'(p_alpha/p_theta) dP_alpha; +-inf when the integral diverges."""
        g = self.gamma
        if self.divergence.is_kl_modified:
            return np.zeros_like(np.asarray(theta, dtype=float))[()]
        if self.divergence.is_kl:
            kl = self.model.kl(self.alpha, theta)
            if kl is not None:
                return kl
            th = np.asarray(theta, dtype=float)
            vals = [self._kl_quad(float(t)) for t in th.ravel()]
            return np.asarray(vals).reshape(th.shape)[()]
        J = self.tilted_terms(theta)[0]
        return (np.asarray(J) - 1.0) / (g - 1.0)

    def _kl_quad(self, theta):
        key = ("kl", theta)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        m, a = self.model, self.alpha
        val = integrate(lambda x: math.exp(m.logpdf(a, x)) * (m.logpdf(a, x) - m.logpdf(theta, x)),
                        self.quadrature, m.center(a), m.spread(a))
        with self._lock:
            self._cache[key] = val
        return val

    def weighted_score_integral(self, theta):
        """int (p_alpha/p_theta)**gamma pdot_theta dlambda."""
        if self.divergence.is_kl_modified:
            return np.zeros_like(np.asarray(theta, dtype=float))[()]
        return self.tilted_terms(theta)[1]

    def _curvature_integral(self, theta):
        if self.divergence.is_kl_modified:
            # int [s**2 + ds] dP_theta = 0 for regular families
            return np.zeros_like(np.asarray(theta, dtype=float))[()]
        return self.tilted_terms(theta)[2]

    # -- pointwise payoff ----------------------------------------------------
    def dual_payoff(self, theta, x):
        """m(theta, alpha, x); -inf where the x-free integral diverges."""
        self.model.check_theta(theta)
        I0 = np.asarray(self.integral_term(theta), dtype=float)
        lr = self._log_ratio(theta, x)
        with np.errstate(invalid="ignore"):
            out = I0 - self.divergence.conjugate_term(lr)
        out = np.where(np.isfinite(I0), out, -np.inf)
        return out[()] if np.ndim(out) == 0 else out

    def dual_payoff_dtheta(self, theta, x):
        """Theta derivative of the payoff (the estimating-equation summand)."""
        self.model.check_theta(theta)
        K1 = self.weighted_score_integral(theta)
        lr = self._log_ratio(theta, x)
        out = -K1 + _signed_exp(self.gamma * lr, self.model.score(theta, x))
        return out[()] if np.ndim(out) == 0 else out

    def dual_payoff_d2theta(self, theta, x):
        """Second theta derivative of the payoff."""
        self.model.check_theta(theta)
        K2 = self._curvature_integral(theta)
        lr = self._log_ratio(theta, x)
        s = self.model.score(theta, x)
        ds = self.model.dscore(theta, x)
        out = -K2 + _signed_exp(self.gamma * lr, ds - self.gamma * s * s)
        return out[()] if np.ndim(out) == 0 else out

    def weighted_score(self, theta, x):
        """(p_alpha(x)/p_theta(x))**gamma * s_theta(x)."""
        return _signed_exp(self.gamma * self._log_ratio(theta, x), self.model.score(theta, x))

    # -- empirical criterion ---------------------------------------------------
    def empirical_criterion(self, theta, sample):
        """(1/n) sum_i m(theta, alpha, X_i); theta may be an array (grid evaluation)."""
        return self.criterion_on(theta, *empirical_measure(sample))

    def empirical_dtheta(self, theta, sample):
        """(1/n) sum_i m'(theta, alpha, X_i), the estimating-equation residual."""
        return self.dtheta_on(theta, *empirical_measure(sample))

    def empirical_d2theta(self, theta, sample):
        support, w = empirical_measure(sample)
        return float(self.dual_payoff_d2theta(theta, support) @ w)

    def criterion_on(self, theta, support, weights):
        """Criterion against a weighted discrete measure (see :func:`empirical_measure`)."""
        th = np.asarray(theta, dtype=float)
        self.model.check_theta(th)
        I0 = np.asarray(self.integral_term(th), dtype=float)
        lr = self._log_ratio(th[..., None], support)
        conj = self.divergence.conjugate_term(lr)
        with np.errstate(invalid="ignore", over="ignore"):
            out = I0 - conj @ weights
        out = np.where(np.isfinite(I0) & ~np.isnan(out), out, -np.inf)
        return out[()] if out.ndim == 0 else out

    def dtheta_on(self, theta, support, weights) -> float:
        return float(self.dual_payoff_dtheta(theta, support) @ weights)

    # -- population quantities ---------------------------------------------
    def population_divergence(self, theta0: float) -> float:
        """phi(alpha, theta0) = int phi(p_alpha/p_theta0) dP_theta0 by quadrature (inf if divergent)."""
        m, a, g = self.model, self.alpha, self.gamma
        m.check_theta(theta0)
        if a == theta0:
            return 0.0
        lpa = lambda x: m.logpdf(a, x)  # noqa: E731
        lp0 = lambda x: m.logpdf(theta0, x)  # noqa: E731
        if self.divergence.is_kl_modified:
            f = lambda x: math.exp(lp0(x)) * (lp0(x) - lpa(x)) + math.exp(lpa(x)) - math.exp(lp0(x))  # noqa: E731
        elif self.divergence.is_kl:
            f = lambda x: math.exp(lpa(x)) * (lpa(x) - lp0(x)) - math.exp(lpa(x)) + math.exp(lp0(x))  # noqa: E731
        else:
            if not m.tilted_integrable(a, theta0, g):
                return math.inf

            def f(x):
                t = math.exp(g * lpa(x) + (1.0 - g) * lp0(x))
                return (t - g * math.exp(lpa(x)) + (g - 1.0) * math.exp(lp0(x))) / (g * (g - 1.0))
        try:
            return integrate(f, self.quadrature, m.center(theta0), m.spread(theta0))
        except QuadratureError:
            if not np.isfinite(f(m.center(theta0) + 1e6 * m.spread(theta0))):
                return math.inf
            raise

    def population_criterion(self, theta: float, theta0: float) -> float:
        """int m(theta, alpha) dP_theta0; -inf when a defining integral diverges."""
        m, a, g = self.model, self.alpha, self.gamma
        I0 = float(self.integral_term(theta))
        if not np.isfinite(I0):
            return -math.inf
        lp0 = lambda x: m.logpdf(theta0, x)  # noqa: E731
        lr = lambda x: m.logpdf(a, x) - m.logpdf(theta, x)  # noqa: E731
        if self.divergence.is_kl_modified:
            f = lambda x: math.exp(lp0(x)) * lr(x)  # noqa: E731
        else:
            f = lambda x: (math.exp(g * lr(x) + lp0(x)) - math.exp(lp0(x))) / g  # noqa: E731
        try:
            with np.errstate(over="raise"):
                conj = integrate(f, self.quadrature, m.center(theta0), m.spread(theta0))
        except (QuadratureError, OverflowError, FloatingPointError):
            return -math.inf
        return I0 - conj

    def population_dtheta(self, theta: float, theta0: float) -> float:
        """int m'(theta, alpha) dP_theta0 by quadrature."""
        m, g = self.model, self.gamma
        K1 = float(self.weighted_score_integral(theta))
        f = lambda x: float(_signed_exp(g * self._log_ratio(theta, x) + m.logpdf(theta0, x),  # noqa: E731
                                        m.score(theta, x)))
        return -K1 + integrate(f, self.quadrature, m.center(theta0), m.spread(theta0))


def dual_payoff(c: DualCriterion, theta, x):
    return c.dual_payoff(theta, x)


def dual_payoff_dtheta(c: DualCriterion, theta, x):
    return c.dual_payoff_dtheta(theta, x)


def empirical_criterion(c: DualCriterion, theta, sample):
    return c.empirical_criterion(theta, sample)


def population_divergence(c: DualCriterion, theta0: float) -> float:
    return c.population_divergence(theta0)
