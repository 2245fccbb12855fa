"""The stable-1/2 random bridge: conditional laws of the terminal value.

Given a prior ``nu`` for ``U = S_T`` and an observation ``S_s = xi``, the
conditional law of ``U`` has density proportional to

    1{z > xi} (z / (z - xi))^{3/2} exp(-(c^2/2) ((T-s)^2/(z-xi) - T^2/z)) p(z).

Multiplying that proportionality constant by ``1 - s/T`` gives the mass
``psi_s(R; xi) = int f_{T-s}(z - xi) / f_T(z) nu(dz)`` that drives the
transition law of the paid-claims process.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import optimize
from scipy.interpolate import PchipInterpolator

from .prior import PriorLaw, integrate_against
from .quadrature import GAUSS_WEIGHTS, GK_NODES, GK_WEIGHTS, QuadResult, QuadratureError
from .stable import BridgeParams, subordinator_logpdf

__all__ = [
    "Observation",
    "ConditionalLaw",
    "psi_mass",
    "posterior_normalizer",
    "posterior_density",
    "posterior_cdf",
    "posterior_sf",
    "posterior_quantile",
    "posterior_expectation",
    "transition_density",
    "reanchor",
    "PosteriorSampler",
]


@dataclass(frozen=True)
class Observation:
    """Paid-to-date ``xi`` at time ``s``."""

    s: float
    xi: float

    def __post_init__(self):
        if not (math.isfinite(self.s) and self.s >= 0):
            raise ValueError(f"observation time must be >= 0, got {self.s}")
        if not (math.isfinite(self.xi) and self.xi >= 0):
            raise ValueError(f"paid amount must be >= 0, got {self.xi}")
        if self.s == 0 and self.xi != 0:
            raise ValueError("nothing can be paid at time 0")


def _log_rn_factor(c, T, s, xi, z):
    """Log of ``(z/(z-xi))^{3/2} exp(-(c^2/2)((T-s)^2/(z-xi) - T^2/z))`` on ``z > xi``."""
    z = np.asarray(z, dtype=float)
    out = np.full(z.shape, -np.inf)
    inside = z > xi
    zi = z[inside]
    w = zi - xi
    if xi == 0.0:
        # the two exponents combine exactly
        out[inside] = -0.5 * c * c * ((T - s) ** 2 - T * T) / zi
    else:
        out[inside] = 1.5 * (np.log(zi) - np.log(w)) - 0.5 * c * c * ((T - s) ** 2 / w - T * T / zi)
    return out


@dataclass(frozen=True)
class ConditionalLaw:
    """The law of the ultimate loss given ``anchor``, with its normalizer cached."""

    prior: PriorLaw
    anchor: Observation
    params: BridgeParams

    def __post_init__(self):
        if not self.anchor.s < self.params.T:
            raise ValueError(f"observation time {self.anchor.s} must precede the horizon {self.params.T}")
        lo, hi = self.prior.support
        if self.anchor.xi >= hi:
            raise ValueError("paid amount is beyond the support of the prior")

    @property
    def s(self) -> float:
        return self.anchor.s

    @property
    def xi(self) -> float:
        return self.anchor.xi

    @property
    def is_prior(self) -> bool:
        return self.anchor.s == 0.0

    @property
    def boundary_layer(self) -> float:
        """Width scale ``c^2 (T-s)^2 / 2`` of the layer just above ``xi``."""
        return 0.5 * (self.params.c * (self.params.T - self.anchor.s)) ** 2

    def log_factor(self, z):
        c, T = self.params.c, self.params.T
        return _log_rn_factor(c, T, self.anchor.s, self.anchor.xi, z)

    def integrate(self, log_integrand: Callable | None = None, lower: float | None = None,
                  upper: float = math.inf, extra_breakpoints=()) -> QuadResult:
        """Unnormalised ``int g(z) (RN factor) nu(dz)`` over ``(max(lower, xi), upper)``."""
        lo = self.anchor.xi if lower is None else max(lower, self.anchor.xi)

        def f(z):
            base = self.log_factor(z)
            if log_integrand is None:
                return base
            out = log_integrand(z)
            if isinstance(out, tuple):
                return base + out[0], out[1]
            return base + out

        layer = self.boundary_layer if self.anchor.xi > 0 else None
        pts = list(extra_breakpoints)
        if self.anchor.xi > 0:
            pts.append(self.anchor.xi)
        return integrate_against(self.prior, f, lo, upper=upper, extra_breakpoints=pts,
                                 layer_scale=layer)

    @cached_property
    def _normalizer(self) -> QuadResult:
        if self.is_prior:
            return QuadResult(0.0, 1, 0.0, 0)
        res = self.integrate()
        if res.sign <= 0:
            raise QuadratureError("conditional law has no mass", res.value, res.error)
        return res

    @property
    def log_normalizer(self) -> float:
        return self._normalizer.log_abs

    @property
    def normalizer(self) -> float:
        """``psi_s(R; xi) / (1 - s/T)``, the constant dividing the posterior density."""
        return math.exp(self.log_normalizer)

    @property
    def log_psi(self) -> float:
        return self.log_normalizer + math.log1p(-self.anchor.s / self.params.T)

    @property
    def quad_error(self) -> float:
        return self._normalizer.rel_error

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        out = self.log_factor(z) + self.prior.logpdf(z) - self.log_normalizer
        return out[()] if out.ndim == 0 else out

    def pdf(self, z):
        return np.exp(self.logpdf(z))

    def expectation(self, log_integrand: Callable | None = None, lower: float | None = None,
                    upper: float = math.inf) -> QuadResult:
        """``int g(z) nu_s(dz)``, ``g`` given by its log (or a ``(log, sign)`` pair)."""
        res = self.integrate(log_integrand, lower, upper)
        if res.sign == 0:
            return res
        return QuadResult(res.log_abs - self.log_normalizer, res.sign,
                          res.rel_error + self._normalizer.rel_error, res.nevals)

    def cdf(self, y: float) -> float:
        if y <= self.anchor.xi:
            return 0.0
        if self.is_prior:
            return float(self.prior.cdf(y))
        lower = self.expectation(upper=y).value
        return min(max(lower, 0.0), 1.0)

    def sf(self, y: float) -> float:
        if y <= self.anchor.xi:
            return 1.0
        if self.is_prior:
            return float(self.prior.sf(y))
        return min(max(self.expectation(lower=y).value, 0.0), 1.0)

    def quantile(self, p: float, tol: float = 1e-8) -> float:
        """Bisection on the distribution function to ``tol`` in probability."""
        if not 0.0 < p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        xi = self.anchor.xi
        # bracket in w = z - xi on a log scale
        w_hi = max(self.boundary_layer, 1.0, float(self.prior.ppf(min(p, 0.5)) - xi))
        _, sup_hi = self.prior.support
        while self.cdf(xi + w_hi) < p:
            if xi + w_hi >= sup_hi:
                w_hi = sup_hi - xi
                break
            w_hi *= 4.0
        w_lo = w_hi
        while w_lo > 1e-300 and self.cdf(xi + w_lo) > p:
            w_lo *= 0.25
        lo, hi = math.log(w_lo), math.log(w_hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            F = self.cdf(xi + math.exp(mid))
            if abs(F - p) <= tol:
                return xi + math.exp(mid)
            if F < p:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        return xi + math.exp(0.5 * (lo + hi))


def psi_mass(params: BridgeParams, prior: PriorLaw, obs: Observation) -> float:
    """``psi_s(R; xi) = int f_{T-s}(z - xi) / f_T(z) nu(dz)``; equal to 1 at ``s = 0``."""
    return math.exp(ConditionalLaw(prior, obs, params).log_psi)


def posterior_normalizer(law: ConditionalLaw) -> float:
    """``psi_s(R; xi) / (1 - s/T)``."""
    return law.normalizer


def posterior_density(law: ConditionalLaw, z):
    return law.pdf(z)


def posterior_cdf(law: ConditionalLaw, y: float) -> float:
    return law.cdf(y)


def posterior_sf(law: ConditionalLaw, y: float) -> float:
    return law.sf(y)


def posterior_quantile(law: ConditionalLaw, p: float, tol: float = 1e-8) -> float:
    return law.quantile(p, tol)


def posterior_expectation(law: ConditionalLaw, log_integrand=None, lower=None, upper=math.inf) -> QuadResult:
    return law.expectation(log_integrand, lower, upper)


def transition_density(params: BridgeParams, prior: PriorLaw, start: Observation, end: Observation):
    """``psi_t(R; y) / psi_s(R; x) * f_{t-s}(y - x)`` for moving from ``start`` to ``end``."""
    if not start.s < end.s < params.T:
        raise ValueError(f"need s < t < T, got s={start.s}, t={end.s}, T={params.T}")
    if end.xi < start.xi:
        raise ValueError("paid-claims paths are nondecreasing")
    if end.xi == start.xi:
        return 0.0
    log_from = ConditionalLaw(prior, start, params).log_psi
    log_to = ConditionalLaw(prior, end, params).log_psi
    return math.exp(log_to - log_from + float(subordinator_logpdf(params.c, end.s - start.s, end.xi - start.xi)))


def reanchor(law: ConditionalLaw, new_obs: Observation) -> ConditionalLaw:
    """Condition on a later observation; by the Markov property only the latest one matters."""
    if new_obs == law.anchor:
        return law
    if not new_obs.s > law.anchor.s:
        raise ValueError("observations must move forward in time")
    if new_obs.xi < law.anchor.xi:
        raise ValueError("paid amounts must be nondecreasing")
    return ConditionalLaw(law.prior, new_obs, law.params)


class PosteriorSampler:
    """Inverse-CDF sampler for a conditional law, built from a fine table.

    The distribution function is tabulated on ``n_nodes`` points spaced
    geometrically in ``z - xi`` (plus any prior breakpoints), with panel
    masses from a composite Gauss-Kronrod rule; the inverse is a monotone
    cubic through the table. Probabilities beyond the table ends (below
    ``1e-13`` in either tail) are mapped to the table ends.
    """

    def __init__(self, law: ConditionalLaw, n_nodes: int = 600, subpanels: int = 4):
        self.law = law
        xi = law.anchor.xi
        w_lo = self._edge(lambda w: law.cdf(xi + w) - 1e-13, low=True)
        w_hi = self._edge(lambda w: law.sf(xi + w) - 1e-13, low=False)
        ws = np.geomspace(w_lo, w_hi, n_nodes)
        z = xi + ws
        lo, hi = law.prior.support
        extra = [b for b in list(law.prior.breakpoints()) + [lo, hi] if z[0] < b < z[-1]]
        z = np.unique(np.concatenate([z, extra]))
        z = z[(z > lo) | (z == lo)]
        if math.isfinite(hi):
            z = z[z <= hi]
        masses, rel = self._panel_masses(z, subpanels)
        cum = np.concatenate([[0.0], np.cumsum(masses)])
        start = law.cdf(z[0])
        total = cum[-1] + start + law.sf(z[-1])
        if abs(total - 1.0) > 1e-6:
            raise QuadratureError("posterior table does not carry unit mass", total, rel)
        F = start + cum
        keep = np.concatenate([[True], np.diff(F) > 0])
        self._F = F[keep]
        self._logw = np.log(z[keep] - xi) if xi > 0 else np.log(z[keep])
        self._inverse = PchipInterpolator(self._F, self._logw, extrapolate=False)

    def _edge(self, fn, low):
        # fn(w) changes sign across the edge; locate it coarsely in log w
        law = self.law
        xi = law.anchor.xi
        _, hi = law.prior.support
        scale = max(law.boundary_layer if xi > 0 else 0.0, float(law.prior.ppf(0.5)) - xi, 1e-12)
        if low:
            w = scale
            while fn(w) > 0 and w > 1e-300:
                w *= 0.5
            return w
        w = scale
        while fn(w) > 0:
            if xi + 2 * w >= hi:
                return (hi - xi) * (1.0 - 1e-12)
            w *= 2.0
            if w > 1e300:
                break
        return w

    def _panel_masses(self, z, subpanels):
        law = self.law
        edges = np.concatenate([np.linspace(a, b, subpanels + 1)[:-1] for a, b in zip(z[:-1], z[1:])] + [z[-1:]])
        a, b = edges[:-1], edges[1:]
        half = 0.5 * (b - a)
        x = 0.5 * (a + b)[:, None] + half[:, None] * GK_NODES[None, :]
        vals = law.pdf(x.ravel()).reshape(x.shape) * half[:, None]
        kron = vals @ GK_WEIGHTS
        gauss = vals @ GAUSS_WEIGHTS
        masses = kron.reshape(len(z) - 1, subpanels).sum(axis=1)
        rel = float(np.abs(kron - gauss).sum() / max(kron.sum(), 1e-300))
        return masses, rel

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        uc = np.clip(u, self._F[0], self._F[-1])
        w = np.exp(self._inverse(uc))
        out = w + self.law.anchor.xi if self.law.anchor.xi > 0 else w
        return out[()] if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size=None):
        return self.ppf(rng.uniform(size=size))
