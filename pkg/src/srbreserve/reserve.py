"""Reserving quantities computed from a conditional law of the ultimate loss.

Every integral here is taken against the cached law ``nu_s`` of a
:class:`~srbreserve.lrb.ConditionalLaw`; the paid-claims value at a later
time ``t`` is handled through the bridge from ``(s, xi)`` to ``(T, z)``,
whose increment is a standard bridge of horizon ``T - s`` evaluated at
``t - s`` with terminal value ``z - xi``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .bridge import _bridge_sf, _bridge_upper_moment, _increment_second_moment
from .lrb import ConditionalLaw, Observation
from .prior import PriorLaw
from .quadrature import QuadratureError
from .stable import BridgeParams

__all__ = [
    "InfiniteMomentError",
    "ReservingReport",
    "LayerSpec",
    "REPORT_QUANTILES",
    "best_estimate",
    "conditional_variance",
    "conditional_second_moment",
    "paid_claims_conditional_mean",
    "paid_claims_conditional_second_moment",
    "expected_exceedance",
    "layer_recovery_schedule",
    "conditional_value_at_risk",
    "tail_ratio",
    "tail_ratio_limit",
    "reserving_report",
]

REPORT_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


class InfiniteMomentError(ValueError):
    """The prior lacks a moment that the requested quantity needs."""


def _require_moments(law: ConditionalLaw, order: int) -> None:
    flags = law.prior.moments().finite_flags
    if not all(flags[:order]):
        what = "mean" if order == 1 else "second moment"
        raise InfiniteMomentError(f"the prior ultimate-loss law has an infinite {what}")


def _log_pos(x):
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(x, 0.0))


def best_estimate(law: ConditionalLaw) -> float:
    """``U_sT = int z nu_s(dz)``."""
    _require_moments(law, 1)
    if law.is_prior:
        return law.prior.moments().mean
    return max(law.expectation(lambda z: np.log(z)).value, law.xi)


def conditional_second_moment(law: ConditionalLaw) -> float:
    _require_moments(law, 2)
    if law.is_prior:
        return law.prior.moments().second_moment
    return law.expectation(lambda z: 2.0 * np.log(z)).value


def conditional_variance(law: ConditionalLaw) -> float:
    """``int (z - U_sT)^2 nu_s(dz)``, integrated around the mean rather than by subtraction."""
    _require_moments(law, 2)
    if law.is_prior:
        return law.prior.moments().variance
    U = best_estimate(law)
    return law.expectation(lambda z: 2.0 * _log_pos(np.abs(z - U))).value


def _check_future(law: ConditionalLaw, t: float) -> None:
    if not law.s < t <= law.params.T:
        raise ValueError(f"need s < t <= T, got s={law.s}, t={t}, T={law.params.T}")


def paid_claims_conditional_mean(law: ConditionalLaw, t: float) -> float:
    """``E[xi_t | xi_s] = ((T - t) xi_s + (t - s) U_sT) / (T - s)``."""
    _check_future(law, t)
    T, s = law.params.T, law.s
    return ((T - t) * law.xi + (t - s) * best_estimate(law)) / (T - s)


def paid_claims_conditional_second_moment(law: ConditionalLaw, t: float) -> float:
    """``E[xi_t^2 | xi_s]``.

    Conditionally on ``U = z`` the increment ``xi_t - xi_s`` has mean
    ``(t-s)/(T-s) (z - xi_s)`` and second moment
    ``(t-s)/(T-s) w^2 {1 - c (T-t) sqrt(2 pi / w) e^{c^2 (T-s)^2/(2w)} Phi(-c (T-s)/sqrt(w))}``
    with ``w = z - xi_s``; the exponential-times-``Phi`` product is evaluated
    as a scaled complementary error function.
    """
    _check_future(law, t)
    _require_moments(law, 2)
    T, s, x, c = law.params.T, law.s, law.xi, law.params.c
    U = best_estimate(law)
    if t == T:
        return conditional_second_moment(law)
    inc2 = law.expectation(lambda z: _log_pos(_increment_second_moment(c, s, t, T, x, z))).value
    return x * x + 2.0 * x * (t - s) / (T - s) * (U - x) + inc2


def _exceedance_integrand(law: ConditionalLaw, t: float, k: float):
    """Log of ``E[(Delta - k)^+ | U = z]`` for the bridge increment ``Delta``."""
    c, T, s, x = law.params.c, law.params.T, law.s, law.xi

    def log_g(z):
        w = np.asarray(z, dtype=float) - x
        val = _bridge_upper_moment(c, t - s, T - s, k, w) - k * _bridge_sf(c, t - s, T - s, k, w)
        return _log_pos(np.atleast_1d(val))

    return log_g


def expected_exceedance(law: ConditionalLaw, t: float, K: float) -> float:
    """``D_st(K) = E[(xi_t - K)^+ | xi_s]``."""
    _check_future(law, t)
    _require_moments(law, 1)
    if K < 0:
        raise ValueError("attachment K must be nonnegative")
    x = law.xi
    if K <= x:
        return paid_claims_conditional_mean(law, t) - K
    if t == law.params.T:
        return law.expectation(lambda z: _log_pos(z - K), lower=K).value
    return law.expectation(_exceedance_integrand(law, t, K - x), lower=K).value


@dataclass(frozen=True)
class LayerSpec:
    """An aggregate ``limit`` excess of ``attachment`` treaty paying on ``payment_dates``."""

    attachment: float
    limit: float
    payment_dates: tuple

    def __post_init__(self):
        if not self.attachment >= 0:
            raise ValueError("attachment must be nonnegative")
        if not self.limit > 0:
            raise ValueError("limit must be positive")
        dates = tuple(float(d) for d in self.payment_dates)
        if not dates:
            raise ValueError("at least one payment date is needed")
        if any(b <= a for a, b in zip(dates[:-1], dates[1:])):
            raise ValueError("payment dates must be strictly increasing")
        object.__setattr__(self, "payment_dates", dates)


def _layer_value(law: ConditionalLaw, t: float, layer: LayerSpec) -> float:
    """Expected cumulative layer loss ``E[min((xi_t - K)^+, L) | xi_s]``."""
    K, L = layer.attachment, layer.limit
    if t == law.s:
        return min(max(law.xi - K, 0.0), L)
    D = expected_exceedance(law, t, K)
    if math.isinf(L):
        return D
    return D - expected_exceedance(law, t, K + L)


def layer_recovery_schedule(law: ConditionalLaw, layer: LayerSpec) -> list[tuple[float, float]]:
    """Expected payment on each date: the change in expected cumulative layer loss since the previous date."""
    T, s = law.params.T, law.s
    dates = list(layer.payment_dates)
    if abs(dates[-1] - T) > 1e-12 * max(T, 1.0):
        raise ValueError(f"the last payment date must be the horizon T={T}")
    dates[-1] = T
    if dates[0] < s:
        raise ValueError("payment dates must not precede the observation time")
    if dates[0] == s:
        warnings.warn("payment date equal to the observation time contributes nothing and is dropped",
                      stacklevel=2)
        dates = dates[1:]
    out = []
    prev = _layer_value(law, s, layer)
    for d in dates:
        cur = _layer_value(law, d, layer)
        out.append((d, cur - prev))
        prev = cur
    return out


def conditional_value_at_risk(law: ConditionalLaw, t: float, theta: float) -> float:
    """``E[xi_t | xi_s, xi_t > theta]`` for ``theta > xi_s``."""
    _check_future(law, t)
    _require_moments(law, 1)
    x = law.xi
    if not theta > x:
        raise ValueError("theta must exceed the paid amount")
    c, T, s = law.params.c, law.params.T, law.s
    if t == T:
        den = law.expectation(lower=theta).value
        num_fn = lambda z: np.log(z)  # noqa: E731
    else:
        k = theta - x

        def sf_log(z):
            return _log_pos(np.atleast_1d(_bridge_sf(c, t - s, T - s, k, np.asarray(z) - x)))

        def num_fn(z):
            w = np.asarray(z, dtype=float) - x
            val = x * _bridge_sf(c, t - s, T - s, k, w) + _bridge_upper_moment(c, t - s, T - s, k, w)
            return _log_pos(np.atleast_1d(val))

        den = law.expectation(sf_log, lower=theta).value
    if den < 1e-12:
        raise QuadratureError("exceedance probability below 1e-12; conditional mean is unstable", den, math.inf)
    num = law.expectation(num_fn, lower=theta).value
    return max(num / den, theta)


def tail_ratio(law: ConditionalLaw, L: float) -> float:
    """``P[U > L] / P[U - xi_s > L | xi_s]`` at a finite level ``L``, formed in log space."""
    if not L > 0:
        raise ValueError("L must be positive")
    log_num = float(law.prior.log_sf(L))
    if law.is_prior:
        return 1.0
    den = law.expectation(lower=law.xi + L)
    if den.sign <= 0 or not np.isfinite(log_num):
        raise QuadratureError("tail probability underflowed", den.value, math.inf)
    return math.exp(log_num - den.log_abs)


def tail_ratio_limit(law: ConditionalLaw) -> float:
    """``lim_{L -> inf}`` of :func:`tail_ratio`: ``normalizer * lim p(L) / p(L + xi)``."""
    ratio = law.prior.tail_shift_ratio(law.xi)
    if math.isinf(ratio):
        return math.inf
    return law.normalizer * ratio


@dataclass(frozen=True)
class ReservingReport:
    t: float
    paid: float
    ultimate_best_estimate: float
    reserve: float
    variance: float
    q05: float
    q25: float
    q50: float
    q75: float
    q95: float
    quad_err: float

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def quantiles(self) -> list[tuple[float, float]]:
        return list(zip(REPORT_QUANTILES, (self.q05, self.q25, self.q50, self.q75, self.q95)))


def reserving_report(params: BridgeParams, prior: PriorLaw, obs: Observation) -> ReservingReport:
    """Best estimate, reserve, variance and quantiles of the ultimate loss at ``obs``.

    An observation at the horizon pins the ultimate loss to the paid amount.
    """
    if obs.s == params.T:
        x = obs.xi
        return ReservingReport(obs.s, x, x, 0.0, 0.0, x, x, x, x, x, 0.0)
    law = ConditionalLaw(prior, obs, params)
    _require_moments(law, 2)
    U = best_estimate(law)
    var = conditional_variance(law)
    qs = [float(law.prior.ppf(p)) if law.is_prior else law.quantile(p) for p in REPORT_QUANTILES]
    qs = [float(q) for q in np.maximum.accumulate(qs)]
    return ReservingReport(obs.s, obs.xi, U, U - obs.xi, max(var, 0.0), *qs, quad_err=law.quad_error)
