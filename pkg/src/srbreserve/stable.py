"""The stable-1/2 subordinator with activity parameter ``c``.

``S_t`` has the Levy density ``ct / (sqrt(2 pi) x^{3/2}) exp(-c^2 t^2 / (2x))``
on ``x > 0``. Everything else in this module (distribution function,
quantile, sampler, Laplace transform) is derived from that density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "BridgeParams",
    "subordinator_logpdf",
    "subordinator_density",
    "subordinator_cdf",
    "subordinator_sf",
    "subordinator_quantile",
    "sample_increment",
    "laplace_transform",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class BridgeParams:
    """Activity parameter ``c`` and run-off horizon ``T``."""

    c: float
    T: float

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"activity parameter c must be positive, got {self.c}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"horizon T must be positive, got {self.T}")


def subordinator_logpdf(c: float, t: float, x):
    """Log density of ``S_t``; ``-inf`` off the positive half-line."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, -np.inf)
    pos = x > 0
    xp = x[pos]
    ct = c * t
    out[pos] = math.log(ct) - _LOG_SQRT_2PI - 1.5 * np.log(xp) - 0.5 * ct * ct / xp
    return out[()] if out.ndim == 0 else out


def subordinator_density(params: BridgeParams, t: float, x):
    return np.exp(subordinator_logpdf(params.c, t, x))


def subordinator_cdf(params: BridgeParams, t: float, x):
    """``P[S_t <= x] = 2 Phi(-ct / sqrt(x))``."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(x > 0, special.erfc(params.c * t / np.sqrt(np.where(x > 0, 2.0 * x, 1.0))), 0.0)
    return out[()] if out.ndim == 0 else out


def subordinator_sf(params: BridgeParams, t: float, x):
    """``P[S_t > x] = erf(ct / sqrt(2x))``, without the ``1 - cdf`` cancellation."""
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, special.erf(params.c * t / np.sqrt(np.where(x > 0, 2.0 * x, 1.0))), 1.0)
    return out[()] if out.ndim == 0 else out


def subordinator_quantile(params: BridgeParams, t: float, p):
    """Inverse of :func:`subordinator_cdf`: ``(ct / Phi^{-1}(1 - p/2))^2``."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("p must lie strictly between 0 and 1")
    # Phi^{-1}(1 - p/2) = -Phi^{-1}(p/2), which keeps precision for small p
    q = -special.ndtri(0.5 * p)
    out = (params.c * t / q) ** 2
    return out[()] if out.ndim == 0 else out


def sample_increment(params: BridgeParams, dt: float, rng: np.random.Generator, size=None):
    """Exact draw(s) of ``S_{t+dt} - S_t`` as ``(c dt / Z)^2`` with ``Z ~ N(0, 1)``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = rng.standard_normal(size)
    # Z == 0 has probability zero but would give +inf
    z = np.where(z == 0.0, np.finfo(float).tiny, z)
    out = (params.c * dt / z) ** 2
    return out[()] if np.ndim(out) == 0 else out


def laplace_transform(params: BridgeParams, t: float, lam):
    """``E[exp(-lam S_t)] = exp(-c t sqrt(2 lam))``.

    This is the transform of the density above. The often-quoted form
    ``exp(-c t sqrt(lam / 2))`` corresponds to a density with ``c`` replaced
    by ``c / 2`` and does not match it.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    out = np.exp(-params.c * t * np.sqrt(2.0 * lam))
    return out[()] if out.ndim == 0 else out
