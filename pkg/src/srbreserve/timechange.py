"""Deterministic operational time driven by a marginal-exposure profile.

With marginal exposure ``eps`` on ``[0, T]`` the operational clock is
``tau(t) = T * int_0^t eps / int_0^T eps``. The time-changed paid-claims
process is ``xi(tau(t))``, so every reserving quantity at calendar time ``t``
is the untransformed quantity at operational time ``tau(t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lrb import ConditionalLaw, Observation
from .prior import PriorLaw
from .reserve import (
    LayerSpec,
    ReservingReport,
    best_estimate,
    conditional_value_at_risk,
    expected_exceedance,
    layer_recovery_schedule,
    paid_claims_conditional_mean,
    reserving_report,
)
from .stable import BridgeParams

__all__ = [
    "ExposureCurve",
    "IdentityExposure",
    "WeibullExposure",
    "TabulatedExposure",
    "ExposurePeak",
    "operational_time",
    "inverse_operational_time",
    "exposure_peak",
    "curve_from_config",
    "TimeChangedModel",
    "timechanged_view",
]


class ExposureCurve:
    kind = "abstract"

    def marginal(self, t):
        raise NotImplementedError

    def cumulative(self, t):
        """``int_0^t eps``."""
        raise NotImplementedError

    def tau(self, T: float, t):
        t = np.asarray(t, dtype=float)
        total = float(self.cumulative(T))
        if not total > 0:
            raise ValueError("total exposure on [0, T] must be positive")
        out = T * np.asarray(self.cumulative(t), dtype=float) / total
        out = np.where(t >= T, T, np.where(t <= 0, 0.0, out))
        return out[()] if out.ndim == 0 else out

    def tau_inverse(self, T: float, u):
        raise NotImplementedError


@dataclass(frozen=True)
class IdentityExposure(ExposureCurve):
    kind = "identity"

    def marginal(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def cumulative(self, t):
        return np.asarray(t, dtype=float)

    def tau(self, T, t):
        return t

    def tau_inverse(self, T, u):
        return u


@dataclass(frozen=True)
class WeibullExposure(ExposureCurve):
    """Weibull-density exposure ``(b/a) (t/a)^{b-1} exp(-(t/a)^b)``."""

    a: float
    b: float
    kind = "weibull"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("Weibull exposure needs a > 0 and b > 0")

    def marginal(self, t):
        t = np.asarray(t, dtype=float)
        r = np.maximum(t, 0.0) / self.a
        with np.errstate(divide="ignore"):
            out = self.b / self.a * r ** (self.b - 1.0) * np.exp(-r**self.b)
        return np.where(t > 0, out, 0.0 if self.b > 1 else out)

    def cumulative(self, t):
        r = np.maximum(np.asarray(t, dtype=float), 0.0) / self.a
        return -np.expm1(-r**self.b)

    def tau(self, T, t):
        """``T (1 - exp(-(t/a)^b)) / (1 - exp(-(T/a)^b))``; exact at both ends."""
        t = np.asarray(t, dtype=float)
        out = T * self.cumulative(t) / float(self.cumulative(T))
        out = np.where(t >= T, T, np.where(t <= 0, 0.0, out))
        return out[()] if out.ndim == 0 else out

    def tau_inverse(self, T, u):
        u = np.asarray(u, dtype=float)
        frac = u / T * float(self.cumulative(T))
        out = self.a * (-np.log1p(-frac)) ** (1.0 / self.b)
        out = np.where(u >= T, T, np.where(u <= 0, 0.0, out))
        return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class TabulatedExposure(ExposureCurve):
    """Bucketed exposure: ``exposure[i]`` applies on ``[times[i], times[i+1])``.

    ``times`` starts at 0; the last bucket runs on indefinitely. The
    cumulative exposure is piecewise linear, so the clock is exact.
    """

    times: tuple
    exposure: tuple
    kind = "tabulated"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        e = np.asarray(self.exposure, dtype=float)
        if t.ndim != 1 or t.size < 1 or t.size != e.size:
            raise ValueError("times and exposure must be 1-d of equal length")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("exposure times must start at 0 and increase strictly")
        if np.any(e < 0) or not np.all(np.isfinite(e)):
            raise ValueError("exposure values must be finite and nonnegative")
        if not np.any(e > 0):
            raise ValueError("exposure must not be identically zero")
        object.__setattr__(self, "times", tuple(float(v) for v in t))
        object.__setattr__(self, "exposure", tuple(float(v) for v in e))

    def marginal(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1)
        return np.asarray(self.exposure)[idx]

    def cumulative(self, t):
        t = np.asarray(t, dtype=float)
        knots = np.asarray(self.times)
        e = np.asarray(self.exposure)
        cum = np.concatenate([[0.0], np.cumsum(e[:-1] * np.diff(knots))])
        idx = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(knots) - 1)
        out = cum[idx] + e[idx] * (np.maximum(t, 0.0) - knots[idx])
        return np.where(t <= 0, 0.0, out)

    def tau_inverse(self, T, u):
        # tabulate the clock on the knots inside [0, T]; it is linear between them
        u = np.asarray(u, dtype=float)
        knots = np.array([k for k in self.times if k < T] + [T])
        taus = np.asarray(self.tau(T, knots))
        # keep both ends of a flat stretch so each side interpolates correctly
        moves = np.diff(taus) > 0
        keep = np.concatenate([[True], moves]) | np.concatenate([moves, [True]])
        out = np.interp(u, taus[keep], knots[keep])
        return out[()] if out.ndim == 0 else out


class ExposurePeak(NamedTuple):
    """``peak`` is ``None`` when the marginal exposure decreases throughout."""

    peak: float | None
    monotone_decreasing: bool


def exposure_peak(curve: WeibullExposure) -> ExposurePeak:
    """Maximiser ``a ((b-1)/b)^{1/b}`` of the Weibull marginal exposure."""
    if curve.b <= 1.0:
        return ExposurePeak(None, True)
    return ExposurePeak(curve.a * ((curve.b - 1.0) / curve.b) ** (1.0 / curve.b), False)


def operational_time(curve: ExposureCurve, T: float, t):
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0) | (t_arr > T)):
        raise ValueError(f"calendar time must lie in [0, {T}]")
    return curve.tau(T, t)


def inverse_operational_time(curve: ExposureCurve, T: float, u):
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr < 0) | (u_arr > T)):
        raise ValueError(f"operational time must lie in [0, {T}]")
    return curve.tau_inverse(T, u)


def curve_from_config(cfg: dict | None) -> ExposureCurve:
    if cfg is None:
        return IdentityExposure()
    kind = cfg.get("kind")
    try:
        if kind == "identity":
            return IdentityExposure()
        if kind == "weibull":
            return WeibullExposure(float(cfg["a"]), float(cfg["b"]))
        if kind == "tabulated":
            return TabulatedExposure(tuple(cfg["times"]), tuple(cfg["exposure"]))
    except KeyError as exc:
        raise ValueError(f"exposure cfg of kind {kind!r} is missing field {exc}") from None
    raise ValueError(f"unknown exposure kind {kind!r}")


@dataclass(frozen=True)
class TimeChangedModel:
    """Reserving operations in calendar time, delegated to operational time."""

    params: BridgeParams
    prior: PriorLaw
    curve: ExposureCurve

    @property
    def T(self) -> float:
        return self.params.T

    def tau(self, t):
        return operational_time(self.curve, self.T, t)

    def law(self, t: float, xi: float) -> ConditionalLaw:
        return ConditionalLaw(self.prior, Observation(float(self.tau(t)), xi), self.params)

    def report(self, t: float, xi: float) -> ReservingReport:
        rep = reserving_report(self.params, self.prior, Observation(float(self.tau(t)), xi))
        return ReservingReport(t, *list(rep.as_dict().values())[1:])

    def expected_development(self, t):
        """``E[xi^tau_t] = (int_0^t eps / int_0^T eps) E[U]``."""
        U = best_estimate(ConditionalLaw(self.prior, Observation(0.0, 0.0), self.params))
        return np.asarray(self.tau(t)) / self.T * U

    def paid_claims_conditional_mean(self, t_obs: float, xi: float, t: float) -> float:
        return paid_claims_conditional_mean(self.law(t_obs, xi), float(self.tau(t)))

    def expected_exceedance(self, t_obs: float, xi: float, t: float, K: float) -> float:
        return expected_exceedance(self.law(t_obs, xi), float(self.tau(t)), K)

    def conditional_value_at_risk(self, t_obs: float, xi: float, t: float, theta: float) -> float:
        return conditional_value_at_risk(self.law(t_obs, xi), float(self.tau(t)), theta)

    def layer_recovery_schedule(self, t_obs: float, xi: float, layer: LayerSpec):
        dates = [float(d) for d in self.tau(np.asarray(layer.payment_dates))]
        op = LayerSpec(layer.attachment, layer.limit, tuple(dates))
        sched = layer_recovery_schedule(self.law(t_obs, xi), op)
        # report calendar dates back
        back = dict(zip(dates, layer.payment_dates))
        return [(back.get(d, d), v) for d, v in sched]

    def calendar_times(self, operational):
        return inverse_operational_time(self.curve, self.T, operational)


def timechanged_view(params: BridgeParams, prior: PriorLaw, curve: ExposureCurve) -> TimeChangedModel:
    return TimeChangedModel(params, prior, curve)
