"""A priori laws for the ultimate loss and quadrature against them.

Every law exposes a vectorised ``logpdf`` plus the handful of services the
rest of the package needs: distribution and quantile functions, exact
sampling, moments with finiteness flags, breakpoints that tell the
quadrature where the mass sits, and the tail ratio ``lim p(L) / p(L + x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable

import numpy as np
from scipy import special, stats
from scipy.interpolate import PchipInterpolator

from .quadrature import QuadResult, QuadratureError, integrate_log
from .specfun import LogWeightedValue, log_bessel_k
from .stable import BridgeParams, subordinator_logpdf, subordinator_quantile

__all__ = [
    "PriorLaw",
    "GIGPrior",
    "GPDPrior",
    "ExponentialPrior",
    "HalfNormalPrior",
    "LevyStablePrior",
    "TabulatedPrior",
    "MomentReport",
    "prior_density",
    "prior_moments",
    "integrate_against",
    "sample_prior",
    "prior_from_config",
]

_BREAK_PROBS = (1e-6, 1e-3, 0.05, 0.5, 0.95, 0.999)


@dataclass(frozen=True)
class MomentReport:
    mean: float
    second_moment: float
    finite_flags: tuple[bool, bool]

    @property
    def variance(self) -> float:
        if not all(self.finite_flags):
            return math.inf
        return self.second_moment - self.mean**2


class PriorLaw:
    """Base class; subclasses are frozen dataclasses and hence hashable."""

    kind = "abstract"

    # support as (lower, upper); upper may be inf
    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def logpdf(self, z):
        raise NotImplementedError

    def pdf(self, z):
        return np.exp(self.logpdf(z))

    def cdf(self, z):
        raise NotImplementedError

    def sf(self, z):
        return 1.0 - self.cdf(z)

    def log_sf(self, z):
        with np.errstate(divide="ignore"):
            return np.log(self.sf(z))

    def ppf(self, u):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        return self.ppf(rng.uniform(size=size))

    def moments(self) -> MomentReport:
        raise NotImplementedError

    def breakpoints(self) -> list[float]:
        """Points that split the support into panels of comparable mass."""
        qs = np.asarray(self.ppf(np.array(_BREAK_PROBS)), dtype=float)
        return [float(q) for q in qs if math.isfinite(q) and q > 0]

    def tail_shift_ratio(self, x: float) -> float:
        """``lim_{L -> inf} p(L) / p(L + x)``, possibly ``inf``."""
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    def _ret(self, out):
        out = np.asarray(out, dtype=float)
        return out[()] if out.ndim == 0 else out


def _positive(name, value, allow_zero=False):
    ok = value >= 0 if allow_zero else value > 0
    if not (ok and math.isfinite(value)):
        bound = "nonnegative" if allow_zero else "positive"
        raise ValueError(f"{name} must be {bound}, got {value}")


@dataclass(frozen=True)
class GIGPrior(PriorLaw):
    """Generalized inverse-Gaussian law with density proportional to
    ``x^{lam-1} exp(-(delta^2/x + gamma^2 x)/2)``."""

    lam: float
    delta: float
    gamma: float
    kind = "gig"

    def __post_init__(self):
        lam, d, g = self.lam, self.delta, self.gamma
        if not all(math.isfinite(v) for v in (lam, d, g)) or d < 0 or g < 0:
            raise ValueError("GIG parameters must be finite with delta, gamma >= 0")
        if lam > 0 and not g > 0:
            raise ValueError("GIG with lambda > 0 needs gamma > 0")
        if lam == 0 and not (d > 0 and g > 0):
            raise ValueError("GIG with lambda = 0 needs delta > 0 and gamma > 0")
        if lam < 0 and not d > 0:
            raise ValueError("GIG with lambda < 0 needs delta > 0")

    @cached_property
    def _log_norm(self) -> float:
        lam, d, g = self.lam, self.delta, self.gamma
        if d == 0.0:
            # gamma law, shape lam, rate g^2/2
            return lam * math.log(0.5 * g * g) - math.lgamma(lam)
        if g == 0.0:
            # reciprocal gamma, shape -lam, scale d^2/2
            return -lam * math.log(0.5 * d * d) - math.lgamma(-lam)
        return lam * math.log(g / d) - math.log(2.0) - log_bessel_k(lam, g * d)

    @cached_property
    def _scipy(self):
        lam, d, g = self.lam, self.delta, self.gamma
        if d == 0.0:
            return stats.gamma(a=lam, scale=2.0 / (g * g))
        if g == 0.0:
            return stats.invgamma(a=-lam, scale=0.5 * d * d)
        return stats.geninvgauss(p=lam, b=g * d, scale=d / g)

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        out = np.full(z.shape, -np.inf)
        pos = z > 0
        zp = z[pos]
        out[pos] = (self._log_norm + (self.lam - 1.0) * np.log(zp)
                    - 0.5 * (self.delta**2 / zp + self.gamma**2 * zp))
        return self._ret(out)

    def cdf(self, z):
        return self._ret(self._scipy.cdf(z))

    def sf(self, z):
        return self._ret(self._scipy.sf(z))

    def log_sf(self, z):
        return self._ret(self._scipy.logsf(z))

    def ppf(self, u):
        return self._ret(self._scipy.ppf(u))

    def sample(self, rng, size=None):
        # scipy's geninvgauss sampler is the ratio-of-uniforms rejection
        # scheme of Hoermann and Leydold; the gamma / reciprocal-gamma limits
        # are sampled directly.
        return self._ret(self._scipy.rvs(size=size, random_state=rng))

    def raw_moment(self, k: int) -> float:
        lam, d, g = self.lam, self.delta, self.gamma
        if d == 0.0:
            return math.exp(math.lgamma(lam + k) - math.lgamma(lam)) * (2.0 / g**2) ** k
        if g == 0.0:
            if k >= -lam:
                return math.inf
            return math.exp(math.lgamma(-lam - k) - math.lgamma(-lam)) * (0.5 * d * d) ** k
        return math.exp(log_bessel_k(lam + k, g * d) - log_bessel_k(lam, g * d)) * (d / g) ** k

    def moments(self):
        m1, m2 = self.raw_moment(1), self.raw_moment(2)
        return MomentReport(m1, m2, (math.isfinite(m1), math.isfinite(m2)))

    def tail_shift_ratio(self, x):
        if self.gamma > 0:
            return math.exp(0.5 * self.gamma**2 * x)
        return 1.0

    def to_config(self):
        return {"kind": "gig", "lambda": self.lam, "delta": self.delta, "gamma": self.gamma}


@dataclass(frozen=True)
class GPDPrior(PriorLaw):
    """Generalized Pareto law with scale ``sigma``, location ``mu`` and ``shape``."""

    sigma: float
    mu: float
    shape: float
    kind = "gpd"

    def __post_init__(self):
        _positive("sigma", self.sigma)
        _positive("mu", self.mu, allow_zero=True)
        if not math.isfinite(self.shape):
            raise ValueError("shape must be finite")

    @property
    def support(self):
        if self.shape < 0:
            return (self.mu, self.mu - self.sigma / self.shape)
        return (self.mu, math.inf)

    def _w(self, z):
        return (np.asarray(z, dtype=float) - self.mu) / self.sigma

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        w = self._w(z)
        out = np.full(z.shape, -np.inf)
        lo, hi = self.support
        inside = (z > lo) & (z < hi) if math.isfinite(hi) else z > lo
        wi = w[inside]
        if self.shape == 0.0:
            out[inside] = -math.log(self.sigma) - wi
        else:
            out[inside] = -math.log(self.sigma) - (1.0 / self.shape + 1.0) * np.log1p(self.shape * wi)
        return self._ret(out)

    def log_sf(self, z):
        w = np.maximum(self._w(z), 0.0)
        if self.shape == 0.0:
            out = -w
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                arg = np.maximum(1.0 + self.shape * w, 0.0)
                out = -np.log(arg) / self.shape
        return self._ret(out)

    def sf(self, z):
        return self._ret(np.exp(self.log_sf(z)))

    def cdf(self, z):
        return self._ret(-np.expm1(self.log_sf(z)))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.shape == 0.0:
            return self._ret(self.mu - self.sigma * np.log1p(-u))
        return self._ret(self.mu + self.sigma * np.expm1(-self.shape * np.log1p(-u)) / self.shape)

    def raw_moment(self, k: int) -> float:
        if self.shape * k >= 1.0:
            return math.inf
        # E[(mu + sigma W)^k] with E[W^j] = j! / prod_{i<=j}(1 - i*shape)
        total = 0.0
        for j in range(k + 1):
            ew = math.factorial(j) / math.prod(1.0 - i * self.shape for i in range(1, j + 1))
            total += math.comb(k, j) * self.mu ** (k - j) * self.sigma**j * ew
        return total

    def moments(self):
        m1, m2 = self.raw_moment(1), self.raw_moment(2)
        return MomentReport(m1, m2, (math.isfinite(m1), math.isfinite(m2)))

    def breakpoints(self):
        pts = super().breakpoints()
        return [self.mu] + pts if self.mu > 0 else pts

    def tail_shift_ratio(self, x):
        if self.shape > 0:
            return 1.0
        if self.shape == 0:
            return math.exp(x / self.sigma)
        raise ValueError("GPD with negative shape has bounded support; no tail limit")

    def to_config(self):
        return {"kind": "gpd", "sigma": self.sigma, "mu": self.mu, "shape": self.shape}


@dataclass(frozen=True)
class ExponentialPrior(PriorLaw):
    rate: float
    kind = "exponential"

    def __post_init__(self):
        _positive("rate", self.rate)

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        return self._ret(np.where(z > 0, math.log(self.rate) - self.rate * z, -np.inf))

    def log_sf(self, z):
        return self._ret(-self.rate * np.maximum(np.asarray(z, dtype=float), 0.0))

    def sf(self, z):
        return self._ret(np.exp(self.log_sf(z)))

    def cdf(self, z):
        return self._ret(-np.expm1(self.log_sf(z)))

    def ppf(self, u):
        return self._ret(-np.log1p(-np.asarray(u, dtype=float)) / self.rate)

    def moments(self):
        return MomentReport(1.0 / self.rate, 2.0 / self.rate**2, (True, True))

    def tail_shift_ratio(self, x):
        return math.exp(self.rate * x)

    def to_config(self):
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class HalfNormalPrior(PriorLaw):
    """Density ``sqrt(2/pi) / scale * exp(-z^2 / (2 scale^2))`` on ``z > 0``."""

    scale: float
    kind = "halfnormal"

    def __post_init__(self):
        _positive("scale", self.scale)

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        s = self.scale
        return self._ret(np.where(z > 0, 0.5 * math.log(2.0 / math.pi) - math.log(s) - 0.5 * (z / s) ** 2, -np.inf))

    def log_sf(self, z):
        z = np.maximum(np.asarray(z, dtype=float), 0.0)
        return self._ret(math.log(2.0) + special.log_ndtr(-z / self.scale))

    def sf(self, z):
        return self._ret(np.exp(self.log_sf(z)))

    def cdf(self, z):
        z = np.maximum(np.asarray(z, dtype=float), 0.0)
        return self._ret(special.erf(z / (math.sqrt(2.0) * self.scale)))

    def ppf(self, u):
        return self._ret(self.scale * special.ndtri(0.5 + 0.5 * np.asarray(u, dtype=float)))

    def moments(self):
        s = self.scale
        return MomentReport(s * math.sqrt(2.0 / math.pi), s * s, (True, True))

    def tail_shift_ratio(self, x):
        # p(L)/p(L+x) = exp((2 L x + x^2) / (2 s^2)) grows without bound
        return math.inf if x > 0 else 1.0

    def to_config(self):
        return {"kind": "halfnormal", "scale": self.scale}


@dataclass(frozen=True)
class LevyStablePrior(PriorLaw):
    """The law of ``S_T`` for a stable-1/2 subordinator with activity ``c``."""

    c: float
    T: float
    kind = "levy"

    def __post_init__(self):
        _positive("c", self.c)
        _positive("T", self.T)

    @property
    def _params(self):
        return BridgeParams(self.c, self.T)

    def logpdf(self, z):
        return subordinator_logpdf(self.c, self.T, z)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(z > 0, special.erfc(self.c * self.T / np.sqrt(2.0 * np.maximum(z, 1e-300))), 0.0)
        return self._ret(out)

    def sf(self, z):
        z = np.asarray(z, dtype=float)
        out = np.where(z > 0, special.erf(self.c * self.T / np.sqrt(2.0 * np.maximum(z, 1e-300))), 1.0)
        return self._ret(out)

    def ppf(self, u):
        return subordinator_quantile(self._params, self.T, u)

    def moments(self):
        return MomentReport(math.inf, math.inf, (False, False))

    def tail_shift_ratio(self, x):
        return 1.0

    def to_config(self):
        return {"kind": "levy", "c": self.c, "T": self.T}


@dataclass(frozen=True, eq=True)
class TabulatedPrior(PriorLaw):
    """Density given on a grid, interpolated monotone-cubically in log space.

    Zero entries are floored far below the smallest positive entry so the
    log interpolant stays finite; the result is renormalised to unit mass.
    """

    grid: tuple
    density: tuple
    kind = "tabulated"
    _floor_gap: float = field(default=30.0, repr=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if g.ndim != 1 or g.size < 2 or g.size != d.size:
            raise ValueError("grid and density must be 1-d of equal length >= 2")
        if np.any(g <= 0) or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing and positive")
        if np.any(d < 0) or not np.any(d > 0) or not np.all(np.isfinite(d)):
            raise ValueError("density values must be finite, nonnegative and not all zero")
        object.__setattr__(self, "grid", tuple(float(v) for v in g))
        object.__setattr__(self, "density", tuple(float(v) for v in d))

    @property
    def support(self):
        return (self.grid[0], self.grid[-1])

    @cached_property
    def _interp(self):
        g = np.asarray(self.grid)
        d = np.asarray(self.density)
        floor = math.log(d[d > 0].min()) - self._floor_gap
        logd = np.where(d > 0, np.log(np.where(d > 0, d, 1.0)), floor)
        return PchipInterpolator(g, logd, extrapolate=False)

    @cached_property
    def _table(self):
        """Fine table of (z, cdf) used for the distribution and quantile functions."""
        g = np.asarray(self.grid)
        sub = 32
        zs = [g[0]]
        for a, b in zip(g[:-1], g[1:]):
            zs.extend(np.linspace(a, b, sub + 1)[1:])
        zs = np.array(zs)
        pieces = [integrate_log(self._raw_logpdf, [(a, b)]).value for a, b in zip(zs[:-1], zs[1:])]
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        return zs, cum

    @cached_property
    def _log_mass(self) -> float:
        return math.log(self._table[1][-1])

    def _raw_logpdf(self, z):
        z = np.asarray(z, dtype=float)
        out = np.full(z.shape, -np.inf)
        inside = (z >= self.grid[0]) & (z <= self.grid[-1])
        out[inside] = self._interp(z[inside])
        return out

    def logpdf(self, z):
        return self._ret(self._raw_logpdf(z) - self._log_mass)

    def cdf(self, z):
        zs, cum = self._table
        z = np.asarray(z, dtype=float)
        # density is smooth between table points; linear interpolation of the
        # cdf there is accurate to the table resolution
        return self._ret(np.interp(z, zs, cum / cum[-1], left=0.0, right=1.0))

    def ppf(self, u):
        zs, cum = self._table
        u = np.asarray(u, dtype=float)
        c = cum / cum[-1]
        keep = np.concatenate([[True], np.diff(c) > 0])
        return self._ret(np.interp(u, c[keep], zs[keep]))

    def moments(self):
        m1 = integrate_against(self, lambda z: np.log(z)).value
        m2 = integrate_against(self, lambda z: 2.0 * np.log(z)).value
        return MomentReport(m1, m2, (True, True))

    def breakpoints(self):
        return list(self.grid)

    def tail_shift_ratio(self, x, tol=1e-3):
        """Sweep ``p(L)/p(L+x)`` over the top of the grid and require it to settle."""
        hi = self.grid[-1] - x
        lo = self.grid[0]
        if hi <= lo:
            raise QuadratureError("grid too short for a tail sweep", math.nan, math.inf)
        Ls = lo + (hi - lo) * (1.0 - 0.5 ** np.arange(1, 9))
        ratios = np.exp(self.logpdf(Ls) - self.logpdf(Ls + x))
        last = ratios[-3:]
        if not np.all(np.isfinite(last)) or np.ptp(last) > tol * abs(last[-1]):
            raise QuadratureError("tail ratio sweep did not settle", float(last[-1]), float(np.ptp(last)))
        return float(last[-1])

    def to_config(self):
        return {"kind": "tabulated", "grid": list(self.grid), "density": list(self.density)}


def prior_density(law: PriorLaw, z):
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= 0):
        raise ValueError("prior density is evaluated at z > 0 only")
    return law.pdf(z_arr)


def prior_moments(law: PriorLaw) -> MomentReport:
    return law.moments()


def _normalise_integrand(integrand: Callable):
    """Accept log arrays, ``(log, sign)`` pairs, or a scalar ``LogWeightedValue`` function."""

    def wrapped(z):
        out = integrand(z)
        if isinstance(out, LogWeightedValue):
            raise TypeError("scalar LogWeightedValue integrands must be wrapped with from_scalar")
        return out

    return wrapped


def from_scalar(fn: Callable[[float], LogWeightedValue]):
    """Vectorise a scalar integrand returning :class:`LogWeightedValue`."""

    def vec(z):
        vals = [fn(float(zi)) for zi in np.ravel(z)]
        return (np.array([v.log_magnitude for v in vals]), np.array([v.sign for v in vals], dtype=float))

    return vec


def integrate_against(
    law: PriorLaw,
    integrand: Callable,
    lower: float = 0.0,
    *,
    upper: float = math.inf,
    extra_breakpoints: Iterable[float] = (),
    layer_scale: float | None = None,
    rtol: float = 1e-11,
) -> QuadResult:
    """``int_lower^upper integrand(z) law(dz)`` by adaptive Gauss-Kronrod.

    ``integrand`` maps an array ``z`` to log magnitudes (or a ``(log, sign)``
    pair). ``layer_scale`` marks a boundary layer of width ``a`` just above
    ``lower`` (integrands like ``exp(-a/(z-lower))``); panels are then
    graded geometrically towards ``lower``. Raises :class:`QuadratureError`
    when the tolerance cannot be met.
    """
    f = _normalise_integrand(integrand)
    sup_lo, sup_hi = law.support
    lo = max(lower, sup_lo)
    hi = min(upper, sup_hi)
    if not hi > lo:
        return QuadResult(-math.inf, 0, 0.0, 0)

    pts = set(law.breakpoints()) | {float(p) for p in extra_breakpoints}
    if layer_scale is not None and layer_scale > 0:
        pts |= {lower + layer_scale * m for m in (0.02, 0.1, 0.3, 1.0, 3.0, 10.0)}
    span_ref = max([abs(p) for p in pts] + [1.0])
    if lo > 0:
        # grade panels towards lower endpoints where boundary layers live
        pts |= {lo + (span_ref) * 2.0**-k for k in range(0, 12)}
    pts = sorted(p for p in pts if lo < p < hi and math.isfinite(p))
    edges = [lo] + pts
    if math.isfinite(hi):
        edges.append(hi)
        segments = list(zip(edges[:-1], edges[1:]))
        tail = None
    else:
        segments = list(zip(edges[:-1], edges[1:]))
        tail = edges[-1] if edges[-1] > 0 else 1.0
        if edges[-1] <= 0:
            segments.append((edges[-1], 1.0))

    def log_f(z):
        out = f(z)
        logm, sign = out if isinstance(out, tuple) else (out, None)
        logm = np.asarray(logm, dtype=float)
        lp = law.logpdf(z)
        total = logm + lp
        if sign is None:
            return total
        return total, np.where(np.isneginf(total), 0.0, np.asarray(sign, dtype=float))

    return integrate_log(log_f, segments, tail, rtol=rtol)


def sample_prior(law: PriorLaw, rng: np.random.Generator, size=None):
    return law.sample(rng, size)


def prior_from_config(cfg: dict) -> PriorLaw:
    """Build a law from its JSON form, e.g. ``{"kind": "gpd", "sigma": 1, "mu": 1, "shape": 0.25}``."""
    kind = cfg.get("kind")
    try:
        if kind == "gig":
            return GIGPrior(float(cfg["lambda"]), float(cfg["delta"]), float(cfg["gamma"]))
        if kind == "gpd":
            return GPDPrior(float(cfg["sigma"]), float(cfg["mu"]), float(cfg["shape"]))
        if kind == "exponential":
            return ExponentialPrior(float(cfg["rate"]))
        if kind == "halfnormal":
            return HalfNormalPrior(float(cfg["scale"]))
        if kind == "levy":
            return LevyStablePrior(float(cfg["c"]), float(cfg["T"]))
        if kind == "tabulated":
            return TabulatedPrior(tuple(cfg["grid"]), tuple(cfg["density"]))
    except KeyError as exc:
        raise ValueError(f"prior cfg of kind {kind!r} is missing field {exc}") from None
    raise ValueError(f"unknown prior kind {kind!r}")
