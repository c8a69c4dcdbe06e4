"""Monte Carlo experiments: contaminated sampling, bias/MSE tables, empirical
level curves, adaptive escort selection and CSV/JSON reporting.

Replication r of a run draws its sample from ``SeedSequence([base_seed, r])``,
so results do not depend on how replications are scheduled across workers.
All estimators of a run see the same samples.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

from .criterion import DualCriterion, as_sample
from .divergence import PowerDivergence
from .estimators import SearchBox, dphi_estimate, divergence_estimate, mdpde, mle, EstimateResult
from .exceptions import DomainError, DualDivError, EstimationError
from .models import ParametricModel
from .testing import TestConfig, decide

THREADS_ENV = "DUALDIV_THREADS"
FAILURE_BUDGET = 0.01
DEFAULT_LEVELS = tuple(round(0.01 * k, 2) for k in range(1, 11))
REPORT_COLUMNS = ("estimator", "gamma", "alpha", "beta", "n", "n_s", "contamination", "bias", "mse", "se")


# -- seeds and workers ----------------------------------------------------------

def replication_seed(base_seed: int, r: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(base_seed), int(r)])


def _child(seed, k: int) -> np.random.SeedSequence:
    """k-th child of `seed` without mutating it."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (k,))


def resolve_threads(requested: int | None = None) -> int:
    """Worker count: `requested`, else DUALDIV_THREADS, with 0 meaning one per CPU."""
    if requested is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        try:
            requested = int(raw)
        except ValueError as exc:
            raise DomainError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if requested < 0:
        raise DomainError("thread count must be >= 0")
    return requested or (os.cpu_count() or 1)


def _parallel_map(fn, items: Sequence, threads: int | None):
    workers = min(resolve_threads(threads), max(1, len(items)))
    if workers == 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


# -- contamination ------------------------------------------------------------------

@dataclass(frozen=True)
class FixedCount:
    """n - count model draws followed by `count` copies of `point`."""

    count: int
    point: float = 10.0

    def validate(self, n: int):
        if not 0 <= self.count < n:
            raise DomainError(f"fixed contamination needs 0 <= count < n, got count={self.count}, n={n}")

    @property
    def label(self) -> str:
        return f"fixed(count={self.count},x={self.point:g})"


@dataclass(frozen=True)
class Mixture:
    """Each observation is `point` with probability epsilon/sqrt(n), otherwise a
    draw from P_{theta0 + drift/sqrt(n)}."""

    epsilon: float
    point: float = 10.0
    drift: float = 0.0

    def validate(self, n: int):
        if not 0 <= self.epsilon / math.sqrt(n) < 1:
            raise DomainError("mixture needs epsilon/sqrt(n) in [0, 1)")

    @property
    def label(self) -> str:
        return f"mixture(eps={self.epsilon:g},x={self.point:g},delta={self.drift:g})"


ContaminationSpec = Union[FixedCount, Mixture]


def contamination_label(spec: ContaminationSpec | None) -> str:
    return "none" if spec is None else spec.label


def draw_contaminated(model: ParametricModel, theta0: float, spec: ContaminationSpec | None,
                      n: int, seed) -> np.ndarray:
    if spec is None:
        return model.sample(theta0, n, seed)
    spec.validate(n)
    if isinstance(spec, FixedCount):
        if spec.count == 0:
            return model.sample(theta0, n, seed)
        return np.concatenate([model.sample(theta0, n - spec.count, seed), np.full(spec.count, float(spec.point))])
    theta_n = theta0 + spec.drift / math.sqrt(n)
    model.check_theta(theta_n)
    out = model.sample(theta_n, n, _child(seed, 1))
    hit = np.random.default_rng(_child(seed, 0)).random(n) < spec.epsilon / math.sqrt(n)
    out[hit] = spec.point
    return out


# -- estimator specs ---------------------------------------------------------------

@dataclass(frozen=True)
class EstimatorSpec:
    kind: str  # "dphi", "mdpde" or "mle"
    gamma: float | None = None
    alpha: float | None = None
    beta: float | None = None
    selection: str = "pilot"

    def __post_init__(self):
        if self.kind == "dphi" and (self.gamma is None or self.alpha is None):
            raise DomainError("dphi estimator needs gamma and alpha")
        if self.kind == "mdpde" and (self.beta is None or not self.beta > 0):
            raise DomainError("mdpde estimator needs beta > 0")
        if self.kind not in ("dphi", "mdpde", "mle"):
            raise DomainError(f"unknown estimator kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "dphi":
            return f"DphiE(alpha={self.alpha:g},gamma={self.gamma:g})"
        if self.kind == "mdpde":
            return f"MDPDE(beta={self.beta:g})"
        return "MLE"

    def estimate(self, model: ParametricModel, sample) -> EstimateResult:
        if self.kind == "dphi":
            return dphi_estimate(_criterion(self.gamma, model, self.alpha), sample, selection=self.selection)
        if self.kind == "mdpde":
            return mdpde(model, self.beta, sample)
        return mle(model, sample)

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorSpec":
        return cls(**{k: d[k] for k in ("kind", "gamma", "alpha", "beta", "selection") if k in d})


@lru_cache(maxsize=256)
def _criterion(gamma: float, model: ParametricModel, alpha: float) -> DualCriterion:
    # one criterion (and quadrature cache) per worker process and configuration
    return DualCriterion(PowerDivergence(float(gamma)), model, float(alpha))


# -- Monte Carlo -------------------------------------------------------------------

@dataclass(frozen=True)
class McConfig:
    model: ParametricModel
    theta0: float
    n: int
    n_s: int
    base_seed: int
    estimators: tuple = ()
    contamination: ContaminationSpec | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("n must be >= 2")
        if self.n_s < 1:
            raise DomainError("n_s must be >= 1")
        self.model.check_theta(self.theta0)
        if self.contamination is not None:
            self.contamination.validate(self.n)
        object.__setattr__(self, "estimators", tuple(self.estimators))

    def sample(self, r: int) -> np.ndarray:
        return draw_contaminated(self.model, self.theta0, self.contamination, self.n,
                                 replication_seed(self.base_seed, r))


@dataclass(frozen=True)
class McSummary:
    estimator: str
    gamma: float | None
    alpha: float | None
    beta: float | None
    n: int
    n_s: int
    contamination: str
    mean_estimate: float
    bias_hat: float
    mse_hat: float
    mc_standard_error: float
    failures: int = 0

    @property
    def valid(self) -> bool:
        return self.failures <= FAILURE_BUDGET * self.n_s and math.isfinite(self.mse_hat)

    def as_row(self) -> dict:
        return {"estimator": self.estimator, "gamma": self.gamma, "alpha": self.alpha, "beta": self.beta,
                "n": self.n, "n_s": self.n_s, "contamination": self.contamination,
                "bias": self.bias_hat, "mse": self.mse_hat, "se": self.mc_standard_error}


def _one_replication(args) -> list[float]:
    cfg, r = args
    x = cfg.sample(r)
    out = []
    for spec in cfg.estimators:
        try:
            res = spec.estimate(cfg.model, x)
            out.append(res.estimate if res.converged else math.nan)
        except DualDivError:
            out.append(math.nan)
    return out


def replicate_estimates(cfg: McConfig) -> np.ndarray:
    """(n_s, n_estimators) array of estimates; NaN marks a failed replication."""
    rows = _parallel_map(_one_replication, [(cfg, r) for r in range(cfg.n_s)], cfg.threads)
    return np.asarray(rows, dtype=float).reshape(cfg.n_s, len(cfg.estimators))


def summarize(cfg: McConfig, spec: EstimatorSpec, estimates: np.ndarray) -> McSummary:
    ok = estimates[np.isfinite(estimates)]
    failures = int(estimates.size - ok.size)
    if ok.size:
        err = ok - cfg.theta0
        mean = float(np.mean(ok))
        bias, mse = float(np.mean(err)), float(np.mean(err * err))
        se = float(np.std(ok, ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else 0.0
    else:
        mean = bias = mse = se = math.nan
    return McSummary(spec.label, spec.gamma, spec.alpha, spec.beta, cfg.n, cfg.n_s,
                     contamination_label(cfg.contamination), mean, bias, mse, se, failures)


def run_mc(cfg: McConfig) -> list[McSummary]:
    """Bias, MSE and Monte Carlo standard error per estimator over paired replications."""
    est = replicate_estimates(cfg)
    return [summarize(cfg, spec, est[:, j]) for j, spec in enumerate(cfg.estimators)]


# -- level curves ---------------------------------------------------------------------

@dataclass(frozen=True)
class LevelPoint:
    alpha0: float
    actual: float  # two-sided rejection frequency
    relative_error: float
    upper_tail_rate: float  # 2 * frequency(phi_hat >= k_n)

    def as_row(self) -> dict:
        return dataclasses.asdict(self)


def _phi_hat_replication(args) -> float:
    cfg, test, r = args
    try:
        return divergence_estimate(test.criterion, cfg.sample(r), selection=test.selection)
    except DualDivError:
        return math.nan


def replicate_phi_hat(cfg: McConfig, test: TestConfig) -> np.ndarray:
    if test.sample_size_n != cfg.n:
        raise DomainError("test sample size differs from the Monte Carlo sample size")
    rows = _parallel_map(_phi_hat_replication, [(cfg, test, r) for r in range(cfg.n_s)], cfg.threads)
    return np.asarray(rows, dtype=float)


def level_curve(cfg: McConfig, test: TestConfig, nominal_levels: Iterable[float] = DEFAULT_LEVELS
                ) -> list[LevelPoint]:
    """Empirical level of the divergence test at each nominal level."""
    levels = [float(a) for a in nominal_levels]
    if not all(0 < a < 1 for a in levels):
        raise DomainError("nominal levels must lie in (0, 1)")
    phis = replicate_phi_hat(cfg, test)
    ok = phis[np.isfinite(phis)]
    if phis.size - ok.size > FAILURE_BUDGET * cfg.n_s:
        raise EstimationError(f"{phis.size - ok.size} of {cfg.n_s} replications failed")
    out = []
    for a0 in levels:
        t = dataclasses.replace(test, alpha0=a0)
        rej = np.array([decide(t, p, cfg.n).reject for p in ok])
        actual = float(rej.mean())
        upper = float(2.0 * np.mean(ok >= t.k_n(cfg.n)))
        out.append(LevelPoint(a0, actual, (actual - a0) / a0, upper))
    return out


def empirical_power(cfg: McConfig, test: TestConfig) -> float:
    """2 * frequency(phi_hat >= k_n), the finite-n counterpart of the asymptotic power."""
    phis = replicate_phi_hat(cfg, test)
    ok = phis[np.isfinite(phis)]
    return float(2.0 * np.mean(ok >= test.k_n(cfg.n)))


# -- adaptive escort ------------------------------------------------------------------

@dataclass(frozen=True)
class AdaptiveRow:
    alpha: float
    estimate: float
    b_n: float
    error: str | None = None


@dataclass(frozen=True)
class AdaptiveResult:
    alpha_star: float
    table: tuple

    def as_dict(self) -> dict:
        return {"alpha_star": self.alpha_star, "table": [dataclasses.asdict(r) for r in self.table]}


def adaptive_alpha(divergence: PowerDivergence, model: ParametricModel, sample, alpha_grid: Iterable[float],
                   box: SearchBox | None = None, selection: str = "pilot") -> AdaptiveResult:
    """Escort minimising the leave-one-out maximal bias
    B_n(alpha) = max_i |theta_hat_n(alpha) - theta_hat_{n-1}^i(alpha)|.

    Ties (within 1e-12) go to the escort closest to its full-sample estimate,
    then to the smallest escort.  Escorts whose estimation fails are kept in
    the table with an error message and excluded from the choice.
    """
    x = as_sample(sample)
    if x.size < 3:
        raise DomainError("adaptive alpha needs n >= 3")
    grid = [float(a) for a in alpha_grid]
    if not grid:
        raise DomainError("alpha grid is empty")
    for a in grid:
        model.check_theta(a)
    rows = []
    for a in grid:
        c = DualCriterion(divergence, model, a)
        try:
            full = _checked(dphi_estimate(c, x, box, selection))
            loo = {}
            for v in np.unique(x):
                # leaving out either copy of a repeated value gives the same sample
                i = int(np.flatnonzero(x == v)[0])
                loo[v] = _checked(dphi_estimate(c, np.delete(x, i), box, selection))
            b = max(abs(full - e) for e in loo.values())
            rows.append(AdaptiveRow(a, full, float(b)))
        except DualDivError as exc:
            rows.append(AdaptiveRow(a, math.nan, math.nan, f"{type(exc).__name__}: {exc}"))
    good = [r for r in rows if r.error is None]
    if not good:
        raise EstimationError("estimation failed for every alpha in the grid")
    best = min(r.b_n for r in good)
    tied = [r for r in good if r.b_n <= best + 1e-12]
    star = min(tied, key=lambda r: (abs(r.alpha - r.estimate), r.alpha))
    return AdaptiveResult(star.alpha, tuple(rows))


def _checked(res: EstimateResult) -> float:
    if not res.converged:
        raise EstimationError(f"estimate {res.estimate} did not converge (residual {res.stationarity_residual})")
    return res.estimate


# -- reporting -----------------------------------------------------------------------

def _rows(results) -> tuple[list[dict], tuple]:
    results = list(results)
    if not results:
        return [], REPORT_COLUMNS
    rows = [r.as_row() for r in results]
    return rows, tuple(rows[0].keys())


def render(results, fmt: str = "csv") -> str:
    rows, cols = _rows(results)
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    if fmt != "csv":
        raise DomainError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def report(results, fmt: str = "csv", destination=None) -> None:
    """Write summaries (or level points) as CSV or JSON to a path, a file object, or stdout."""
    text = render(results, fmt)
    if destination is None or destination == "-":
        sys.stdout.write(text)
    elif hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def read_report(text: str, fmt: str = "json") -> list[dict]:
    if fmt == "json":
        return json.loads(text)
    return list(csv.DictReader(io.StringIO(text)))
