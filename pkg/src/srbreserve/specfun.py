"""Special functions used by every density and moment in the package.

Products of the form ``exp(a) * Phi(x)`` appear throughout the bridge
formulas with ``a`` huge and ``Phi(x)`` tiny; they are evaluated in log
space through the scaled complementary error function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.integrate import quad

__all__ = [
    "LogWeightedValue",
    "std_normal_cdf",
    "log_std_normal_cdf",
    "mills",
    "scaled_cdf_product",
    "gamma_fn",
    "hankel_symbol",
    "bessel_k_half_integer",
    "bessel_k_half_integer_scaled",
    "log_bessel_k",
]

_SQRT2 = math.sqrt(2.0)
_SCALED_BRANCH = -8.0


@dataclass(frozen=True)
class LogWeightedValue:
    """A real number stored as ``sign * exp(log_magnitude)``."""

    log_magnitude: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign}")
        if self.sign != 0 and not math.isfinite(self.log_magnitude):
            raise ValueError("nonzero value needs a finite log magnitude")

    @classmethod
    def zero(cls) -> "LogWeightedValue":
        return cls(-math.inf, 0)

    @classmethod
    def from_float(cls, x: float) -> "LogWeightedValue":
        if x == 0.0:
            return cls.zero()
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)

    def __float__(self) -> float:
        return self.value

    def __mul__(self, other: "LogWeightedValue") -> "LogWeightedValue":
        if self.sign == 0 or other.sign == 0:
            return LogWeightedValue.zero()
        return LogWeightedValue(self.log_magnitude + other.log_magnitude, self.sign * other.sign)


def std_normal_cdf(x):
    """Standard normal distribution function, vectorised."""
    return special.ndtr(x)


def log_std_normal_cdf(x):
    """``log Phi(x)``; for ``x <= -8`` this goes through ``erfcx`` directly."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    lo = x <= _SCALED_BRANCH
    out[~lo] = special.log_ndtr(x[~lo])
    xl = x[lo]
    out[lo] = np.log(0.5 * special.erfcx(-xl / _SQRT2)) - 0.5 * xl * xl
    return out[()] if out.ndim == 0 else out


def mills(u):
    """``exp(u**2 / 2) * Phi(-u)``, finite for all real ``u``.

    For ``u >= 0`` this is bounded by 1/2 and decays like ``1/(u sqrt(2 pi))``.
    """
    u = np.asarray(u, dtype=float)
    return 0.5 * special.erfcx(u / _SQRT2)


def scaled_cdf_product(log_scale: float, x: float) -> LogWeightedValue:
    """Return ``exp(log_scale) * Phi(x)`` as a :class:`LogWeightedValue`.

    Accurate when ``log_scale`` is close to ``x**2 / 2``: the Gaussian factor
    is pulled out of ``Phi`` and cancelled against ``log_scale`` before any
    exponentiation.
    """
    if not (math.isfinite(log_scale) and math.isfinite(x)):
        raise ValueError("log_scale and x must be finite")
    if x <= _SCALED_BRANCH:
        # Phi(x) = exp(-x^2/2) * erfcx(-x/sqrt2) / 2
        log_mag = (log_scale - 0.5 * x * x) + math.log(0.5 * float(special.erfcx(-x / _SQRT2)))
    else:
        log_mag = log_scale + float(special.log_ndtr(x))
    return LogWeightedValue(log_mag, 1)


def gamma_fn(x: float) -> float:
    if x <= 0:
        raise ValueError(f"gamma_fn defined here for x > 0 only, got {x}")
    return math.gamma(x)


def hankel_symbol(m: float, n: int) -> float:
    """Hankel's symbol ``(m, n) = Gamma(m + 1/2 + n) / (n! Gamma(m + 1/2 - n))``.

    For half-integer ``m = k + 1/2`` it reduces to ``(k+n)! / (n! (k-n)!)`` and is
    computed exactly in integers.
    """
    k = m - 0.5
    if float(k).is_integer() and k >= 0:
        k = int(k)
        if n > k:
            return 0.0
        return float(math.factorial(k + n) // (math.factorial(n) * math.factorial(k - n)))
    return math.exp(math.lgamma(m + 0.5 + n) - math.lgamma(n + 1)) / gamma_fn(m + 0.5 - n)


def bessel_k_half_integer_scaled(n: int, z):
    """``exp(z) * K_{n+1/2}(z)`` from the finite Hankel sum."""
    if n < 0:
        # K_{-nu} = K_{nu}
        n = -n - 1
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("bessel_k_half_integer requires z > 0")
    total = np.zeros_like(z)
    inv2z = 1.0 / (2.0 * z)
    # Horner in 1/(2z), highest order first
    for j in range(n, -1, -1):
        total = total * inv2z + hankel_symbol(n + 0.5, j)
    out = np.sqrt(np.pi / (2.0 * z)) * total
    return out[()] if out.ndim == 0 else out


def bessel_k_half_integer(n: int, z):
    """Modified Bessel function ``K_{n+1/2}(z)`` for integer ``n``."""
    z_arr = np.asarray(z, dtype=float)
    return bessel_k_half_integer_scaled(n, z_arr) * np.exp(-z_arr)


def log_bessel_k(nu: float, z: float) -> float:
    """``log K_nu(z)`` for real order and ``z > 0``.

    Half-integer orders use the Hankel sum; other orders integrate
    ``int_0^inf exp(-z (cosh u - 1)) cosh(nu u) du`` numerically.
    """
    if z <= 0:
        raise ValueError("log_bessel_k requires z > 0")
    twice = 2.0 * nu
    if float(twice).is_integer() and int(twice) % 2 != 0:
        n = int(round(nu - 0.5))
        return math.log(float(bessel_k_half_integer_scaled(n, z))) - z
    a = abs(nu)

    def log_f(u):
        u = np.asarray(u, dtype=float)
        au = a * u
        return -z * np.expm1(np.logaddexp(u, -u) - math.log(2.0)) + au + np.log1p(np.exp(-2.0 * au)) - math.log(2.0)

    # upper cut where the integrand has dropped by exp(-60) from its peak
    us = np.linspace(0.0, 60.0, 6001)
    lf = log_f(us)
    peak = lf.max()
    cut = us[np.nonzero(lf > peak - 60.0)[0].max()] + 1.0
    val, _ = quad(lambda u: math.exp(float(log_f(u)) - peak), 0.0, cut, epsabs=0.0, epsrel=1e-13, limit=200)
    return math.log(val) + peak - z
