"""Cressie-Read power divergences.

The generator of index ``gamma`` is

    phi_gamma(t) = (t**gamma - gamma*t + gamma - 1) / (gamma*(gamma - 1))

with the limit forms ``-log t + t - 1`` (gamma = 0, modified Kullback-Leibler)
and ``t log t - t + 1`` (gamma = 1, Kullback-Leibler).  Every generator is
normalised so that phi(1) = phi'(1) = 0 and phi''(1) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

#: indices closer than this to 0 or 1 use the exact limit branch
LIMIT_TOL = 1e-9


def _as_nonneg(t):
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("phi is only defined for finite arguments")
    if np.any(arr < 0):
        raise DomainError("phi is only defined for t >= 0")
    return arr


def _pow_limit(t, p):
    """t**p for t >= 0 with the 0**p limits (inf for p < 0)."""
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.exp(p * np.log(t))
    if p == 0:
        out = np.ones_like(t)
    return out


@dataclass(frozen=True)
class PowerDivergence:
    """Cressie-Read divergence generator with index `gamma`.

    Well-known members: gamma=0 modified KL, gamma=1 KL, gamma=2 chi-square,
    gamma=-1 modified chi-square, gamma=1/2 Hellinger.
    """

    gamma: float

    def __post_init__(self):
        if not np.isfinite(self.gamma):
            raise DomainError("gamma must be finite")

    @property
    def is_kl_modified(self) -> bool:
        return abs(self.gamma) < LIMIT_TOL

    @property
    def is_kl(self) -> bool:
        return abs(self.gamma - 1.0) < LIMIT_TOL

    def phi(self, t):
        """Evaluate phi_gamma(t); t = 0 returns the right limit (possibly +inf)."""
        t = _as_nonneg(t)
        g = self.gamma
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            logt = np.log(t)
            if self.is_kl_modified:
                out = -logt + t - 1.0
            elif self.is_kl:
                out = np.where(t > 0, t * logt, 0.0) - t + 1.0
            else:
                # expm1 keeps precision when gamma*log(t) is small
                out = (np.expm1(g * logt) - g * (t - 1.0)) / (g * (g - 1.0))
                if g < 0:
                    out = np.where(t == 0, np.inf, out)
                else:
                    out = np.where(t == 0, 1.0 / g, out)
        return out[()] if out.ndim == 0 else out

    def deriv(self, t, order: int = 1):
        """Derivative of order 1, 2 or 3 of phi_gamma at t."""
        if order not in (1, 2, 3):
            raise DomainError(f"order must be 1, 2 or 3, got {order}")
        t = _as_nonneg(t)
        g = self.gamma
        if order == 1:
            if np.any(t == 0) and g <= 1:
                raise DomainError("phi' diverges at t = 0 for gamma <= 1")
            with np.errstate(divide="ignore"):
                logt = np.log(t)
            if self.is_kl:
                out = logt
            else:
                with np.errstate(invalid="ignore"):
                    out = np.where(t == 0, -1.0 / (g - 1.0), np.expm1((g - 1.0) * logt) / (g - 1.0))
        elif order == 2:
            if np.any(t == 0) and g < 2:
                raise DomainError("phi'' diverges at t = 0 for gamma < 2")
            out = _pow_limit(t, g - 2.0)
        else:
            if np.any(t == 0) and g < 3 and g != 2:
                raise DomainError("phi''' diverges at t = 0 for gamma < 3")
            out = (g - 2.0) * _pow_limit(t, g - 3.0) if g != 2 else np.zeros_like(t)
        out = np.asarray(out, dtype=float)
        return out[()] if out.ndim == 0 else out

    def conjugate_term(self, log_r):
        """phi'(r) r - phi(r) as a function of log r.

        For the Cressie-Read family this equals (r**gamma - 1)/gamma, and log r
        at gamma = 0.  Working from log r keeps tail ratios finite.
        """
        log_r = np.asarray(log_r, dtype=float)
        if self.is_kl_modified:
            return log_r
        with np.errstate(over="ignore"):
            return np.expm1(self.gamma * log_r) / self.gamma


def phi(d: PowerDivergence, t):
    return d.phi(t)


def phi_deriv(d: PowerDivergence, t, order: int = 1):
    return d.deriv(t, order)
