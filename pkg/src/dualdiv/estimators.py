"""Point estimators: DphiE, the divergence estimate, MDphiE, MLE and MDPDE.

Every estimator is a scalar maximisation handled by :func:`maximize_on_grid`:
a vectorised scan over a fixed grid, bounded Brent refinement around each
grid-local maximum, and a final root polish of the estimating equation when it
changes sign across the bracket.  The scan is what keeps multi-modal criteria
(Cauchy likelihood, dual criteria with a far escort) from returning a local
optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize
from scipy.special import ndtri

from .criterion import DualCriterion, empirical_measure
from .divergence import PowerDivergence
from .exceptions import DomainError, EstimationError
from .models import DEFAULT_QUADRATURE, NormalLocation, NormalScale, ParametricModel, integrate

STATIONARITY_TOL = 1e-6
NEAR_OPTIMAL = 1e-6
TIE_TOL = 1e-12
MAX_REFINED = 25


@dataclass(frozen=True)
class SearchBox:
    lo: float
    hi: float
    grid_points: int = 200
    refine_tol: float = 1e-8

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise DomainError(f"invalid search box ({self.lo}, {self.hi})")
        if self.grid_points < 3:
            raise DomainError("grid_points must be >= 3")
        if self.refine_tol <= 0:
            raise DomainError("refine_tol must be positive")

    @classmethod
    def default(cls, model: ParametricModel, alpha: float, **kw) -> "SearchBox":
        return cls(*model.default_box(alpha), **kw)

    def check(self, model: ParametricModel):
        if not (model.in_param_space(self.lo) and model.in_param_space(self.hi)):
            raise DomainError(f"search box ({self.lo}, {self.hi}) leaves the parameter space")

    def grid(self, model: ParametricModel) -> np.ndarray:
        # scale parameters are searched on a log scale
        if model.kind == "scale" and self.lo > 0:
            g = np.geomspace(self.lo, self.hi, self.grid_points)
        else:
            g = np.linspace(self.lo, self.hi, self.grid_points)
        g[0], g[-1] = self.lo, self.hi
        return g


@dataclass(frozen=True)
class EstimateResult:
    estimate: float
    criterion_value: float
    stationarity_residual: float
    iterations: int
    converged: bool
    local_optima: tuple = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "criterion_value": self.criterion_value,
            "stationarity_residual": self.stationarity_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "local_optima": [list(p) for p in self.local_optima],
        }


def _local_max_indices(vals: np.ndarray) -> list[int]:
    finite = np.isfinite(vals)
    out = []
    for i in range(vals.size):
        if not finite[i]:
            continue
        left = vals[i - 1] if i > 0 else -np.inf
        right = vals[i + 1] if i < vals.size - 1 else -np.inf
        if vals[i] >= left and vals[i] >= right:
            out.append(i)
    return out


def maximize_on_grid(
    objective: Callable[[np.ndarray], np.ndarray],
    derivative: Callable[[float], float] | None,
    grid: np.ndarray,
    refine_tol: float = 1e-8,
    anchor: float | None = None,
) -> EstimateResult:
    """Maximiser of a scalar function over ``[grid[0], grid[-1]]``.

    `objective` must accept an array of points; `derivative` (optional) is the
    derivative of the objective, used to polish each maximiser to a root and
    reported as the stationarity residual.  Without `anchor` the global
    maximiser is returned; with it, the stationary interior local maximiser
    closest to `anchor` (any local maximiser if none is stationary).
    """
    vals = np.asarray(objective(grid), dtype=float)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    finite = np.isfinite(vals)
    if not np.any(finite):
        raise EstimationError("criterion is -inf on the whole search grid")
    lo, hi = float(grid[0]), float(grid[-1])
    f = lambda t: float(objective(np.asarray(t)))  # noqa: E731
    # worse than anything finite on the grid, so Brent steps away from -inf cells
    penalty = -float(vals[finite].min()) + 1e3 * (1.0 + float(np.ptp(vals[finite])))

    def neg(t):
        v = f(t)
        return -v if np.isfinite(v) else penalty

    idx = _local_max_indices(vals)
    if anchor is None:
        idx = sorted(sorted(idx, key=lambda i: -vals[i])[:MAX_REFINED])
    nfev = grid.size
    cands = []
    for i in idx:
        a, b = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, grid.size - 1)])
        res = optimize.minimize_scalar(neg, bounds=(a, b), method="bounded",
                                       options={"xatol": refine_tol})
        nfev += res.nfev
        t, v = float(res.x), f(res.x)
        if not np.isfinite(v) or v < vals[i]:
            t, v = float(grid[i]), float(vals[i])
        if derivative is not None:
            da, db = derivative(a), derivative(b)
            nfev += 2
            if np.isfinite(da) and np.isfinite(db) and da > 0 > db:
                root, rr = optimize.brentq(derivative, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                           full_output=True)
                nfev += rr.function_calls
                vr = f(root)
                if np.isfinite(vr) and vr >= v - 1e-10 * max(1.0, abs(v)):
                    t, v = float(root), vr
        cands.append((t, v))
    best_v = max(v for _, v in cands)
    if anchor is None:
        # smallest theta among (near-)ties
        est, val = min(((t, v) for t, v in cands if v >= best_v - TIE_TOL), key=lambda p: p[0])
    else:
        # candidates that solve the estimating equation come first
        stationary = [(t, v) for t, v in cands if lo < t < hi and (
            derivative is None or abs(derivative(t)) <= STATIONARITY_TOL)]
        est, val = min(stationary or cands, key=lambda p: (abs(p[0] - anchor), p[0]))
    resid = float(derivative(est)) if derivative is not None else float("nan")
    optima = tuple(sorted({(t, v) for t, v in cands if v >= best_v - NEAR_OPTIMAL} | {(est, val)}))
    interior = lo < est < hi
    converged = bool(interior and (derivative is None or abs(resid) <= STATIONARITY_TOL))
    return EstimateResult(est, val, resid, int(nfev), converged, optima)


MAD_NORMAL = float(ndtri(0.75))


def pilot_estimate(model: ParametricModel, sample) -> float:
    """Robust starting value: the median for location models, the
    normal-consistent median absolute deviation about the known centre for
    scale models."""
    x = np.asarray(sample, dtype=float).ravel()
    if model.kind == "scale":
        return float(np.median(np.abs(x - model.center(1.0)))) / MAD_NORMAL
    return float(np.median(x))


SELECTIONS = ("global", "pilot")


# -- dual estimators -----------------------------------------------------------

def _box_for(c: DualCriterion, box: SearchBox | None) -> SearchBox:
    box = box or SearchBox.default(c.model, c.alpha)
    box.check(c.model)
    return box


def dphi_estimate(c: DualCriterion, sample, box: SearchBox | None = None,
                  selection: str = "global") -> EstimateResult:
    """theta_hat_n(alpha), a maximiser of the empirical dual criterion.

    ``selection="global"`` returns the global maximiser over the box.
    ``selection="pilot"`` returns the local maximiser nearest
    :func:`pilot_estimate`, i.e. the root of the estimating equation a
    redescending M-estimator reaches from a robust start.  The two differ when
    a few gross outliers lift the criterion near the edge of the region where
    its integral converges.
    """
    if selection not in SELECTIONS:
        raise DomainError(f"selection must be one of {SELECTIONS}")
    box = _box_for(c, box)
    support, w = empirical_measure(sample)
    anchor = pilot_estimate(c.model, sample) if selection == "pilot" else None
    return maximize_on_grid(
        lambda th: c.criterion_on(th, support, w),
        lambda th: c.dtheta_on(th, support, w),
        box.grid(c.model),
        box.refine_tol,
        anchor,
    )


def divergence_estimate(c: DualCriterion, sample, box: SearchBox | None = None,
                        selection: str = "global") -> float:
    """phi_hat_n(alpha, theta0): the empirical criterion at theta_hat_n(alpha), unclamped."""
    return dphi_estimate(c, sample, box, selection).criterion_value


def mdphi_estimate(divergence: PowerDivergence, model: ParametricModel, sample,
                   box: SearchBox | None = None, outer_points: int = 100) -> EstimateResult:
    """alpha_hat_n: minimiser over the escort of the divergence estimate.

    `box` bounds both the escort and the inner parameter search.  The
    reported stationarity residual is a central difference of alpha ->
    phi_hat_n(alpha) at the optimum.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 2:
        return EstimateResult(float("nan"), float("nan"), float("nan"), 0, False, ())
    if box is None:
        box = _data_box(model, x)
    box.check(model)
    support, w = empirical_measure(x)
    inner_failures = []

    def phi_hat(alpha):
        c = DualCriterion(divergence, model, float(alpha))
        res = maximize_on_grid(lambda th: c.criterion_on(th, support, w),
                               lambda th: c.dtheta_on(th, support, w),
                               box.grid(model), box.refine_tol)
        if not res.converged:
            inner_failures.append(float(alpha))
        return res.criterion_value

    outer = SearchBox(box.lo, box.hi, outer_points, box.refine_tol)
    res = maximize_on_grid(lambda a: -np.array([phi_hat(t) for t in np.atleast_1d(a)]).reshape(np.shape(a)),
                           None, outer.grid(model), outer.refine_tol)
    a = res.estimate
    h = 1e-5 * max(abs(a), model.spread(a) if model.kind == "location" else a)
    resid = float("nan")
    if box.lo < a - h and a + h < box.hi:
        resid = (phi_hat(a + h) - phi_hat(a - h)) / (2 * h)
    inner_ok = a not in inner_failures
    converged = bool(res.converged and inner_ok and abs(resid) <= STATIONARITY_TOL)
    optima = tuple((t, -v) for t, v in res.local_optima)
    return EstimateResult(a, -res.criterion_value, resid, res.iterations, converged, optima)


# -- likelihood and density power divergence -----------------------------------

def _data_box(model: ParametricModel, x: np.ndarray) -> SearchBox:
    if model.kind == "scale":
        rms = float(np.sqrt(np.mean((x - model.center(1.0)) ** 2)))
        return SearchBox.default(model, rms if rms > 0 else 1.0)
    return SearchBox.default(model, float(np.median(x)))


def mle(model: ParametricModel, sample, box: SearchBox | None = None) -> EstimateResult:
    """Maximum likelihood; closed form for the normal families."""
    x = np.asarray(sample, dtype=float).ravel()
    support, w = empirical_measure(x)
    loglik = lambda th: model.logpdf(np.asarray(th)[..., None], support) @ w  # noqa: E731
    dloglik = lambda th: float(model.score(th, support) @ w)  # noqa: E731
    closed = None
    if isinstance(model, NormalScale):
        closed = float(np.sqrt(np.sum(w * (support - model.mean) ** 2)))
        if closed == 0.0:
            raise EstimationError("all observations equal the known mean; scale MLE is 0")
    elif isinstance(model, NormalLocation):
        closed = float(support @ w)
    if closed is not None:
        r = dloglik(closed)
        return EstimateResult(closed, float(loglik(closed)), r, 0, abs(r) <= STATIONARITY_TOL,
                              ((closed, float(loglik(closed))),))
    box = box or _data_box(model, x)
    box.check(model)
    return maximize_on_grid(loglik, dloglik, box.grid(model), box.refine_tol)


def dpd_integrals(model: ParametricModel, beta: float, theta):
    """(int p_theta**(1+beta), int s_theta p_theta**(1+beta)) over the real line."""
    th = np.asarray(theta, dtype=float)
    if isinstance(model, NormalScale):
        base = (2.0 * math.pi) ** (-beta / 2.0)
        a = base * th ** (-beta) / math.sqrt(1.0 + beta)
        b = -beta * (1.0 + beta) ** (-1.5) * base * th ** (-beta - 1.0)
        return a, b
    if model.kind == "location":
        # translation invariant: evaluate once at theta = 0
        a, b = _dpd_quad(model, beta, 0.0)
        return np.full(th.shape, a)[()], np.full(th.shape, b)[()]
    vals = np.array([_dpd_quad(model, beta, float(t)) for t in th.ravel()])
    return vals[:, 0].reshape(th.shape)[()], vals[:, 1].reshape(th.shape)[()]


def _dpd_quad(model, beta, theta):
    q, c, s = DEFAULT_QUADRATURE, model.center(theta), model.spread(theta)
    lp = lambda x: (1.0 + beta) * model.logpdf(theta, x)  # noqa: E731
    a = integrate(lambda x: math.exp(lp(x)), q, c, s)
    b = integrate(lambda x: math.exp(lp(x)) * model.score(theta, x), q, c, s)
    return a, b


def mdpde(model: ParametricModel, beta: float, sample, box: SearchBox | None = None) -> EstimateResult:
    """Minimum density power divergence estimator with tuning constant beta.

    Roots of  int s_theta p_theta**(1+beta) - mean s_theta(X_i) p_theta(X_i)**beta = 0
    are located by scanning the objective
    H(theta) = int p_theta**(1+beta) - (1 + 1/beta) mean p_theta(X_i)**beta,
    whose derivative is (1+beta) times that equation; the root minimising H is
    returned.
    """
    if not beta > 0:
        raise DomainError("beta must be positive")
    x = np.asarray(sample, dtype=float).ravel()
    support, w = empirical_measure(x)
    box = box or _data_box(model, x)
    box.check(model)

    def neg_h(th):
        th = np.asarray(th, dtype=float)
        a, _ = dpd_integrals(model, beta, th)
        pb = np.exp(beta * model.logpdf(th[..., None], support)) @ w
        return -(a - (1.0 + 1.0 / beta) * pb)

    def equation(th):
        _, b = dpd_integrals(model, beta, th)
        lp = model.logpdf(th, support)
        return float(b - (model.score(th, support) * np.exp(beta * lp)) @ w)

    grid = box.grid(model)
    eq = np.array([equation(t) for t in grid])
    if not np.any(np.sign(eq[:-1]) * np.sign(eq[1:]) < 0):
        raise EstimationError("estimating equation has no sign change in the search box")
    res = maximize_on_grid(neg_h, lambda t: -equation(t), grid, box.refine_tol)
    # residual of the estimating equation itself
    r = equation(res.estimate)
    optima = tuple((t, -v) for t, v in res.local_optima)
    return EstimateResult(res.estimate, -res.criterion_value, r, res.iterations,
                          bool(res.converged and abs(r) <= STATIONARITY_TOL), optima)
