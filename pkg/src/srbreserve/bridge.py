"""The stable-1/2 bridge from 0 at time 0 to a fixed value ``z`` at time ``T``.

The closed forms for the distribution function and the incomplete first
moment both contain ``exp(2 c^2 t (T-t) / z) * Phi(B)`` with ``B < 0``. Using
the identity ``2 c^2 t (T-t) / z - B^2 / 2 = -A^2 / 2`` (``A`` being the
argument of the leading ``Phi``) that product is rewritten as
``exp(-A^2/2) * mills(-B)``, which never overflows.

Functions prefixed with an underscore take the horizon explicitly so that the
same code serves shifted bridges ``f_{t-s, T-s}(y - x; z - x)``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

from .specfun import mills
from .stable import BridgeParams

__all__ = [
    "bridge_logpdf",
    "bridge_density",
    "bridge_cdf",
    "bridge_sf",
    "bridge_incomplete_first_moment",
    "bridge_upper_first_moment",
    "bridge_conditional_mean",
    "bridge_conditional_second_moment",
    "bridge_conditional_raw_second_moment",
    "bridge_midpoint_sample",
    "midpoint_from_normals",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _check_time(t: float, T: float) -> None:
    if not (0.0 < t < T):
        raise ValueError(f"bridge time must satisfy 0 < t < T, got t={t}, T={T}")


def _ret(out):
    return out[()] if out.ndim == 0 else out


def _bridge_logpdf(c, t, T, y, z):
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    out = np.full(y.shape, -np.inf)
    inside = (y > 0) & (y < z)
    yi, zi = y[inside], z[inside]
    gap = zi - yi
    a2 = (c * (T * yi - t * zi)) ** 2 / (yi * zi * gap)
    out[inside] = (
        math.log(c * t * (T - t) / T) - _LOG_SQRT_2PI - 0.5 * a2 - 1.5 * np.log(yi * gap / zi)
    )
    return _ret(out)


def _pieces(c, t, T, y, z):
    """Return ``Phi(A)``, ``Phi(-A)`` and ``exp(-A^2/2) mills(-B)`` on ``0 < y < z``.

    Everything is built from the scale-free ratios ``y/z``, ``(z-y)/z``,
    ``t/T`` and ``T^2/z``, so rescaling ``(T, t, y, z)`` to
    ``(kT, kt, k^2 y, k^2 z)`` with exactly representable products leaves
    the result unchanged to the last bit.
    """
    u = y / z
    v = (z - y) / z
    tau = t / T
    beta = c * np.sqrt(T * T / z)
    root = np.sqrt(u * v)
    A = beta * (u - tau) / root
    minus_b = beta * (tau - (2.0 * tau - 1.0) * u) / root
    E = np.exp(-0.5 * A * A) * mills(minus_b)
    return special.ndtr(A), special.ndtr(-A), E


def _bridge_cdf(c, t, T, y, z):
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    out = np.where(y >= z, 1.0, 0.0)
    inside = (y > 0) & (y < z)
    if np.any(inside):
        pa, _, E = _pieces(c, t, T, y[inside], z[inside])
        out[inside] = pa + (1.0 - 2.0 * (t / T)) * E
    return _ret(np.clip(out, 0.0, 1.0))


def _bridge_sf(c, t, T, y, z):
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    out = np.where(y <= 0, 1.0, 0.0)
    inside = (y > 0) & (y < z)
    if np.any(inside):
        _, pma, E = _pieces(c, t, T, y[inside], z[inside])
        out[inside] = pma - (1.0 - 2.0 * (t / T)) * E
    return _ret(np.clip(out, 0.0, 1.0))


def _bridge_lower_moment(c, t, T, y, z):
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    full = (t / T) * z
    out = np.where(y >= z, full, 0.0)
    inside = (y > 0) & (y < z)
    if np.any(inside):
        pa, _, E = _pieces(c, t, T, y[inside], z[inside])
        out[inside] = full[inside] * np.clip(pa - E, 0.0, 1.0)
    return _ret(out)


def _bridge_upper_moment(c, t, T, y, z):
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    full = (t / T) * z
    out = np.where(y <= 0, full, 0.0)
    inside = (y > 0) & (y < z)
    if np.any(inside):
        _, pma, E = _pieces(c, t, T, y[inside], z[inside])
        out[inside] = full[inside] * np.clip(pma + E, 0.0, 1.0)
    return _ret(out)


def bridge_logpdf(params: BridgeParams, t: float, y, z):
    _check_time(t, params.T)
    if np.any(np.asarray(z) <= 0):
        raise ValueError("terminal value z must be positive")
    return _bridge_logpdf(params.c, t, params.T, y, z)


def bridge_density(params: BridgeParams, t: float, y, z):
    """Density of the bridge value at time ``t``; zero off ``(0, z]``."""
    return np.exp(bridge_logpdf(params, t, y, z))


def _check_range(y, z):
    y, z = np.asarray(y, dtype=float), np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("terminal value z must be positive")
    if np.any((y < 0) | (y > z)):
        raise ValueError("y must lie in [0, z]")


def bridge_cdf(params: BridgeParams, t: float, y, z):
    """``P[S^{(z)}_{tT} <= y]`` for ``y`` in ``[0, z]``."""
    _check_time(t, params.T)
    _check_range(y, z)
    return _bridge_cdf(params.c, t, params.T, y, z)


def bridge_sf(params: BridgeParams, t: float, y, z):
    """``1 - bridge_cdf``, computed without subtraction from one."""
    _check_time(t, params.T)
    _check_range(y, z)
    return _bridge_sf(params.c, t, params.T, y, z)


def bridge_incomplete_first_moment(params: BridgeParams, t: float, y, z):
    """``M_{tT}(y; z) = E[S 1{S <= y}]`` for the bridge value ``S``."""
    _check_time(t, params.T)
    _check_range(y, z)
    return _bridge_lower_moment(params.c, t, params.T, y, z)


def bridge_upper_first_moment(params: BridgeParams, t: float, y, z):
    """``E[S 1{S > y}] = (t/T) z - M_{tT}(y; z)``."""
    _check_time(t, params.T)
    _check_range(y, z)
    return _bridge_upper_moment(params.c, t, params.T, y, z)


def _check_order(params, s, t, x, z):
    if not (0.0 <= s < t < params.T):
        raise ValueError(f"need 0 <= s < t < T, got s={s}, t={t}, T={params.T}")
    if not (0.0 <= x <= z):
        raise ValueError(f"need 0 <= x <= z, got x={x}, z={z}")


def bridge_conditional_mean(params: BridgeParams, s: float, t: float, x: float, z: float) -> float:
    _check_order(params, s, t, x, z)
    T = params.T
    return ((T - t) * x + (t - s) * z) / (T - s)


def _increment_second_moment(c, s, t, T, x, z):
    w = np.asarray(z, dtype=float) - x
    out = np.zeros_like(w)
    pos = w > 0
    wp = w[pos]
    u = c * (T - s) / np.sqrt(wp)
    out[pos] = (t - s) / (T - s) * wp**2 * (1.0 - c * (T - t) * np.sqrt(2.0 * np.pi / wp) * mills(u))
    return _ret(out)


def bridge_conditional_second_moment(params: BridgeParams, s: float, t: float, x: float, z: float) -> float:
    """The two-time second-moment expression, in the increment ``z - x``.

    Returns ``(t-s)/(T-s) (z-x)^2 {1 - c (T-t) e^{c^2 (T-s)^2 / (2(z-x))}
    sqrt(2 pi / (z-x)) Phi[-c (T-s) / sqrt(z-x)]}``. This is
    ``E[(S_t - x)^2 | S_s = x]``; it coincides with ``E[S_t^2 | S_s = x]`` only
    when ``x = 0``. See :func:`bridge_conditional_raw_second_moment`.
    """
    _check_order(params, s, t, x, z)
    return float(_increment_second_moment(params.c, s, t, params.T, x, z))


def bridge_conditional_raw_second_moment(params: BridgeParams, s: float, t: float, x: float, z: float) -> float:
    """``E[S_t^2 | S_s = x]`` for the bridge to ``z``."""
    inc2 = bridge_conditional_second_moment(params, s, t, x, z)
    inc1 = (t - s) / (params.T - s) * (z - x)
    return x * x + 2.0 * x * inc1 + inc2


def midpoint_from_normals(c: float, dt: float, y, z, normals):
    """Bridge value halfway through an interval of length ``dt`` from ``y`` to ``z``.

    ``y + (z - y) (1 + Z / sqrt(a + Z^2)) / 2`` with ``a = c^2 dt^2 / (z - y)``,
    evaluated through ``b = Z / sqrt(a)`` so tiny gaps cannot overflow; the
    ``Z < 0`` branch is rearranged to avoid cancellation in ``1 + Z/r``.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    Z = np.asarray(normals, dtype=float)
    gap = np.maximum(z - y, 0.0)
    b = Z * np.sqrt(gap) / (c * dt)
    r = np.hypot(1.0, b)
    # 1 + b/r = (r + b)/r, and for b < 0, r + b = 1 / (r - b)
    frac = np.where(b >= 0, (r + b) / r, 1.0 / ((r - b) * r))
    out = y + 0.5 * gap * frac
    # keep the ordering exact under rounding
    out = np.minimum(np.maximum(out, y), np.maximum(z, y))
    return _ret(np.asarray(out))


def bridge_midpoint_sample(params: BridgeParams, s: float, t: float, y: float, z_val: float,
                           rng: np.random.Generator, size=None):
    """Draw the bridge at ``(s+t)/2`` given its values ``y`` at ``s`` and ``z_val`` at ``t``."""
    if not (0.0 <= s < t <= params.T):
        raise ValueError(f"need 0 <= s < t <= T, got s={s}, t={t}")
    if y > z_val:
        raise ValueError("bridge values must be nondecreasing (y <= z_val)")
    normals = rng.standard_normal(size)
    return midpoint_from_normals(params.c, t - s, y, z_val, normals)
