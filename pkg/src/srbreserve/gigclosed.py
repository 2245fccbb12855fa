"""Closed forms when the prior is GIG with ``lambda = n - 1/2`` and ``delta = cT``.

Write ``q_t`` for the inverse-Gaussian density with parameters ``(ct, gamma)``,
``q_t^{(k)}`` for the GIG density with parameters ``(k - 1/2, ct, gamma)`` and
``m_t^{(k)}`` for the ``k``-th moment of ``q_t``. Given ``xi_t = y`` the
ultimate loss is ``y + Z`` where ``Z`` has density proportional to
``(z + y)^n q_{T-t}(z)``, so every conditional moment is a ratio of
binomial-moment polynomials in ``y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .prior import GIGPrior
from .specfun import bessel_k_half_integer_scaled

__all__ = [
    "DEFAULT_MAX_ORDER",
    "IGMomentTable",
    "MixtureWeights",
    "gig_terminal_prior",
    "ig_increment_density",
    "ig_component_density",
    "ig_moment",
    "mixture_weights",
    "mixture_transition_density",
    "closed_best_estimate",
    "closed_higher_moment",
    "closed_exponential_moment",
    "ig_process_transition",
]

DEFAULT_MAX_ORDER = 12


def _check_gamma(gamma: float) -> None:
    if not (gamma > 0 and math.isfinite(gamma)):
        raise ValueError(f"gamma must be positive, got {gamma}")


def _check_order(n: int, max_order: int) -> None:
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer; n = 0 is the pure inverse-Gaussian process")
    if n > max_order:
        raise ValueError(f"n={n} exceeds the configured cap {max_order}")


def gig_terminal_prior(c: float, gamma: float, n: int, T: float) -> GIGPrior:
    """The prior ``GIG(n - 1/2, cT, gamma)`` to which these closed forms apply."""
    return GIGPrior(n - 0.5, c * T, gamma)


def ig_increment_density(c: float, gamma: float, t: float, x):
    """``q_t(x) = ct / (sqrt(2 pi) x^{3/2}) exp(-gamma^2 (x - ct/gamma)^2 / (2x))``."""
    _check_gamma(gamma)
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    pos = x > 0
    xp = x[pos]
    ct = c * t
    out[pos] = ct / math.sqrt(2.0 * math.pi) * xp**-1.5 * np.exp(-0.5 * (gamma * xp - ct) ** 2 / xp)
    return out[()] if out.ndim == 0 else out


def ig_component_density(c: float, gamma: float, k: int, t: float, x):
    """``q_t^{(k)}(x)``, the GIG density with parameters ``(k - 1/2, ct, gamma)``."""
    _check_gamma(gamma)
    return GIGPrior(k - 0.5, c * t, gamma).pdf(x)


@lru_cache(maxsize=256)
def _moment_row(c: float, gamma: float, t: float, kmax: int) -> tuple:
    z = gamma * c * t
    base = float(bessel_k_half_integer_scaled(0, z))
    scale = c * t / gamma
    return tuple(scale**k * float(bessel_k_half_integer_scaled(k - 1, z)) / base for k in range(kmax + 1))


def ig_moment(c: float, gamma: float, t: float, k: int) -> float:
    """``m_t^{(k)} = (ct/gamma)^k K_{k-1/2}(gamma c t) / K_{1/2}(gamma c t)``."""
    _check_gamma(gamma)
    if k < 0 or int(k) != k:
        raise ValueError("k must be a nonnegative integer")
    if t <= 0:
        return 1.0 if k == 0 else 0.0
    return _moment_row(float(c), float(gamma), float(t), int(k))[int(k)]


@dataclass(frozen=True)
class IGMomentTable:
    """Moments ``m_t^{(0..kmax)}`` of ``q_t``, shared across evaluations at one ``t``."""

    c: float
    gamma: float
    t: float
    kmax: int

    @property
    def values(self) -> tuple:
        if self.t <= 0:
            return (1.0,) + (0.0,) * self.kmax
        return _moment_row(float(self.c), float(self.gamma), float(self.t), int(self.kmax))

    def __getitem__(self, k: int) -> float:
        return self.values[k]

    def binomial_polynomial(self, n: int, y):
        """``sum_k C(n, k) m^{(n-k)} y^k = E[(Z + y)^n]``, by Horner's scheme in ``y``."""
        y = np.asarray(y, dtype=float)
        m = self.values
        acc = np.zeros_like(y)
        for k in range(n, -1, -1):
            acc = acc * y + math.comb(n, k) * m[n - k]
        return acc[()] if acc.ndim == 0 else acc


@dataclass(frozen=True)
class MixtureWeights:
    """Weights of the transition density on ``q_{t-s}^{(0)}, ..., q_{t-s}^{(n)}``.

    ``weights[k]`` multiplies the order-``k`` component ``q_{t-s}^{(k)}``.
    """

    n: int
    s: float
    t: float
    x: float
    weights: tuple


def mixture_weights(c: float, gamma: float, n: int, s: float, t: float, x: float, T: float,
                    max_order: int = DEFAULT_MAX_ORDER) -> MixtureWeights:
    """Transition weights from ``(s, x)`` to time ``t``.

    The coefficient of ``q_{t-s}^{(n-j)}`` is
    ``C(n, j) m_{t-s}^{(n-j)} sum_i C(j, i) m_{T-t}^{(j-i)} x^i / sum_i C(n, i) m_{T-s}^{(n-i)} x^i``.
    """
    _check_gamma(gamma)
    _check_order(n, max_order)
    if not 0.0 <= s < t < T:
        raise ValueError(f"need 0 <= s < t < T, got s={s}, t={t}, T={T}")
    if x < 0:
        raise ValueError("x must be nonnegative")
    inc = IGMomentTable(c, gamma, t - s, n)
    rest = IGMomentTable(c, gamma, T - t, n)
    whole = IGMomentTable(c, gamma, T - s, n)
    den = float(whole.binomial_polynomial(n, x))
    w = [0.0] * (n + 1)
    for j in range(n + 1):
        w[n - j] = math.comb(n, j) * inc[n - j] * float(rest.binomial_polynomial(j, x)) / den
    return MixtureWeights(n, s, t, x, tuple(w))


def mixture_transition_density(c: float, gamma: float, n: int, s: float, t: float, x: float, y, T: float):
    """``sum_k weights[k] q_{t-s}^{(k)}(y - x)``."""
    mw = mixture_weights(c, gamma, n, s, t, x, T)
    d = np.asarray(y, dtype=float) - x
    total = sum(wk * np.asarray(ig_component_density(c, gamma, k, t - s, d)) for k, wk in enumerate(mw.weights))
    return total[()] if np.ndim(total) == 0 else total


def closed_higher_moment(c: float, gamma: float, n: int, t: float, xi, T: float, m: int,
                         max_order: int = DEFAULT_MAX_ORDER):
    """``E[U^m | xi_t = xi] = E[(Z + xi)^{n+m}] / E[(Z + xi)^n]`` with ``Z ~ q_{T-t}``."""
    _check_gamma(gamma)
    _check_order(n, max_order)
    if m < 1 or int(m) != m:
        raise ValueError("m must be a positive integer")
    if not 0.0 <= t < T:
        raise ValueError(f"need 0 <= t < T, got t={t}, T={T}")
    table = IGMomentTable(c, gamma, T - t, n + m)
    return table.binomial_polynomial(n + m, xi) / table.binomial_polynomial(n, xi)


def closed_best_estimate(c: float, gamma: float, n: int, t: float, xi, T: float,
                         max_order: int = DEFAULT_MAX_ORDER):
    """Best-estimate ultimate loss, a rational function of the paid amount ``xi``."""
    return closed_higher_moment(c, gamma, n, t, xi, T, 1, max_order)


def closed_exponential_moment(c: float, gamma: float, n: int, t: float, xi, T: float, a: float,
                              max_order: int = DEFAULT_MAX_ORDER):
    """``E[exp(a^2 U / 2) | xi_t = xi]`` for ``0 < a < gamma``.

    Tilting ``q_{T-t}`` by ``exp(a^2 z / 2)`` gives the IG density with
    ``gamma`` replaced by ``gbar = sqrt(gamma^2 - a^2)`` times
    ``exp(c (T-t) (gamma - gbar))``, so the result is the ratio of barred to
    plain moment polynomials times ``exp(a^2 xi / 2 - c (T-t) (gbar - gamma))``.
    """
    _check_gamma(gamma)
    _check_order(n, max_order)
    if not 0.0 < a < gamma:
        raise ValueError("need 0 < a < gamma")
    if not 0.0 <= t < T:
        raise ValueError(f"need 0 <= t < T, got t={t}, T={T}")
    gbar = math.sqrt(gamma * gamma - a * a)
    plain = IGMomentTable(c, gamma, T - t, n)
    barred = IGMomentTable(c, gbar, T - t, n)
    xi = np.asarray(xi, dtype=float)
    ratio = barred.binomial_polynomial(n, xi) / plain.binomial_polynomial(n, xi)
    out = ratio * np.exp(0.5 * a * a * xi - c * (T - t) * (gbar - gamma))
    return out[()] if np.ndim(out) == 0 else out


def ig_process_transition(c: float, gamma: float, s: float, t: float, x: float, y):
    """Transition density of the paid-claims process under the ``GIG(-1/2, cT, gamma)`` prior.

    The process then has independent inverse-Gaussian increments, so this is
    ``q_{t-s}(y - x)`` whatever the horizon.
    """
    if not s < t:
        raise ValueError("need s < t")
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < x):
        raise ValueError("paid-claims paths are nondecreasing (y >= x)")
    return ig_increment_density(c, gamma, t - s, y_arr - x)
