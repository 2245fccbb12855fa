"""Two dependent paid-claims lines cut from one master random bridge.

The master ``S`` runs on ``[0, T*]`` with activity ``c`` and terminal law
``nu``. Line 1 is ``S(t)`` and line 2 is ``k^2 (S(T + lam t) - S(T))`` for
``t`` in ``[0, T]``, with ``lam = T*/T - 1`` and ``k = c2 / (c lam)``.

Because increments of a random bridge can be reordered without changing its
law, an observation ``(t, x1, x2)`` is equivalent to the single master
observation ``S(v) = X`` with ``v = (1 + lam) t`` and ``X = x1 + x2 / k^2``.
From there the outstanding line-1 amount is a master increment over a
window of length ``T - t`` and the outstanding line-2 amount is ``k^2`` times
an increment over a window of length ``T* - T - lam t``; every per-line
quantity is an integral against one conditional law of the master.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .bridge import _bridge_cdf, _bridge_logpdf, _increment_second_moment
from .lrb import ConditionalLaw, Observation
from .prior import PriorLaw, integrate_against
from .reserve import REPORT_QUANTILES, InfiniteMomentError, ReservingReport, best_estimate, conditional_second_moment
from .specfun import mills
from .stable import BridgeParams, subordinator_logpdf

__all__ = [
    "MultiLineConfig",
    "JointObservation",
    "LineTerminalPrior",
    "CorrelationComponents",
    "line_terminal_density",
    "master_law",
    "joint_conditional_density",
    "sum_conditional_density",
    "marginal_conditional_density",
    "best_estimates",
    "line_increment_window",
    "line_reports",
    "a_priori_correlation",
    "correlation_components",
    "split_master_paths",
]


@dataclass(frozen=True)
class MultiLineConfig:
    """Master activity ``c`` and horizon ``T_star``; lines run to ``T``; line 2 has activity ``c2``."""

    c: float
    T_star: float
    T: float
    c2: float

    def __post_init__(self):
        for name in ("c", "T_star", "T", "c2"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")
        if not self.T < self.T_star:
            raise ValueError(f"need T < T_star, got T={self.T}, T_star={self.T_star}")

    @property
    def lam(self) -> float:
        return self.T_star / self.T - 1.0

    @property
    def k(self) -> float:
        return self.c2 / (self.c * self.lam)

    @property
    def master(self) -> BridgeParams:
        return BridgeParams(self.c, self.T_star)


@dataclass(frozen=True)
class JointObservation:
    """Paid amounts ``xi1`` and ``xi2`` (each in its own line's units) at time ``t``."""

    t: float
    xi1: float
    xi2: float

    def __post_init__(self):
        if not (self.t >= 0 and self.xi1 >= 0 and self.xi2 >= 0):
            raise ValueError("time and paid amounts must be nonnegative")
        if self.t == 0 and (self.xi1 != 0 or self.xi2 != 0):
            raise ValueError("nothing can be paid at time 0")


def _check_obs(config: MultiLineConfig, obs: JointObservation) -> None:
    if not obs.t < config.T:
        raise ValueError(f"observation time {obs.t} must precede T={config.T}")


def _master_point(config: MultiLineConfig, obs: JointObservation) -> tuple[float, float]:
    return (1.0 + config.lam) * obs.t, obs.xi1 + obs.xi2 / config.k**2


def line_increment_window(config: MultiLineConfig, line: int, t: float) -> float:
    """Length of the master window that carries the outstanding payments of ``line`` at ``t``."""
    if line == 1:
        return config.T - t
    if line == 2:
        return config.T_star - config.T - config.lam * t
    raise ValueError("line must be 1 or 2")


def _line_scale(config: MultiLineConfig, line: int) -> float:
    return 1.0 if line == 1 else config.k**2


def line_terminal_density(config: MultiLineConfig, prior: PriorLaw, line: int, x):
    """Terminal density of one line.

    ``p1(x) = int f^c_{T,T*}(x; z) p(z) dz`` and
    ``p2(x) = k^{-2} int f^{c2}_{T,T*/lam}(x; z) p(z / k^2) dz``; the latter is
    integrated in ``u = z / k^2`` against the prior.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs <= 0):
        raise ValueError("x must be positive")
    c, Ts, T, c2, k = config.c, config.T_star, config.T, config.c2, config.k
    out = np.empty(xs.shape)
    for i, xv in enumerate(xs):
        if line == 1:
            res = integrate_against(prior, lambda z, xv=xv: _bridge_logpdf(c, T, Ts, xv, z), xv,
                                    layer_scale=0.5 * (c * (Ts - T)) ** 2)
        elif line == 2:
            H = Ts / config.lam
            res = integrate_against(prior, lambda u, xv=xv: _bridge_logpdf(c2, T, H, xv, k * k * u), xv / k**2,
                                    layer_scale=0.5 * (c2 * (H - T)) ** 2 / k**2)
        else:
            raise ValueError("line must be 1 or 2")
        out[i] = res.value
    return out[0] if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class LineTerminalPrior(PriorLaw):
    """Terminal law of one line, usable wherever a prior is expected.

    The density is evaluated by quadrature at every point, so this is meant
    for checks rather than bulk work.
    """

    config: MultiLineConfig
    prior: PriorLaw
    line: int
    kind = "line"

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        out = np.full(z.shape, -np.inf)
        pos = z > 0
        if np.any(pos):
            with np.errstate(divide="ignore"):
                out[pos] = np.log(np.atleast_1d(line_terminal_density(self.config, self.prior, self.line, z[pos])))
        return out[()] if out.ndim == 0 else out

    @cached_property
    def _origin(self) -> ConditionalLaw:
        return ConditionalLaw(self.prior, Observation(0.0, 0.0), self.config.master)

    def cdf(self, y):
        w = line_increment_window(self.config, self.line, 0.0)
        scale = _line_scale(self.config, self.line)
        ys = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.array([_increment_cdf(self._origin, w, yv / scale) if yv > 0 else 0.0 for yv in ys])
        return out[0] if np.ndim(y) == 0 else out

    def ppf(self, u):
        us = np.atleast_1d(np.asarray(u, dtype=float))
        w = line_increment_window(self.config, self.line, 0.0)
        scale = _line_scale(self.config, self.line)
        out = np.array([scale * _increment_quantile(self._origin, w, float(p)) for p in us])
        return out[0] if np.ndim(u) == 0 else out

    def moments(self):
        m = self.prior.moments()
        cc = correlation_components(self.config, self.prior) if all(m.finite_flags) else None
        if self.line == 1:
            mean = self.config.T / self.config.T_star * m.mean
            second = cc.second_moment_1 if cc else math.inf
        else:
            mean = self.config.k**2 * (1.0 - self.config.T / self.config.T_star) * m.mean
            second = cc.second_moment_2 if cc else math.inf
        return type(m)(mean, second, m.finite_flags)

    def breakpoints(self):
        scale = _line_scale(self.config, self.line)
        frac = line_increment_window(self.config, self.line, 0.0) / self.config.T_star
        return [scale * frac * b for b in self.prior.breakpoints()]

    def tail_shift_ratio(self, x):
        raise NotImplementedError("no closed tail ratio for a line terminal law")

    def to_config(self):
        return {"kind": "line", "line": self.line}


def master_law(config: MultiLineConfig, prior: PriorLaw, obs: JointObservation) -> ConditionalLaw:
    """Conditional law of the master terminal value given both lines at ``obs``."""
    _check_obs(config, obs)
    v, X = _master_point(config, obs)
    return ConditionalLaw(prior, Observation(v, X), config.master)


def _check_pair(start: JointObservation, end: JointObservation) -> None:
    if not start.t < end.t:
        raise ValueError("need start.t < end.t")
    if end.xi1 < start.xi1 or end.xi2 < start.xi2:
        raise ValueError("paid-claims paths are nondecreasing")


def joint_conditional_density(config: MultiLineConfig, prior: PriorLaw, start: JointObservation,
                              end: JointObservation) -> float:
    """Density of ``(xi1_t, xi2_t)`` given both lines at ``start``, in line units.

    ``psi_{v_t}(R; Y) / psi_{v_s}(R; X) f^c_{t-s}(y1 - x1) f^c_{lam (t-s)}(y2' - x2') / k^2``
    with primes denoting division by ``k^2`` and ``psi`` taken for the master.
    """
    _check_pair(start, end)
    _check_obs(config, end)
    if end.xi1 == start.xi1 or end.xi2 == start.xi2:
        return 0.0
    k2 = config.k**2
    law_s = master_law(config, prior, start)
    law_t = master_law(config, prior, end)
    dt = end.t - start.t
    log_kernel = (float(subordinator_logpdf(config.c, dt, end.xi1 - start.xi1))
                  + float(subordinator_logpdf(config.c, config.lam * dt, (end.xi2 - start.xi2) / k2)))
    return math.exp(law_t.log_psi - law_s.log_psi + log_kernel) / k2


def sum_conditional_density(config: MultiLineConfig, prior: PriorLaw, start: JointObservation, t: float, y):
    """Density of ``xi1_t + xi2_t / k^2`` given ``start``.

    ``int f^c_{(1+lam)(t-s), T*-(1+lam)s}(y - X; z - X) nu_{(1+lam)s}(dz)``.
    """
    law = master_law(config, prior, start)
    v, X = _master_point(config, start)
    tau = (1.0 + config.lam) * (t - start.t)
    return _increment_density(law, tau, np.asarray(y, dtype=float) - X)


def marginal_conditional_density(config: MultiLineConfig, prior: PriorLaw, start: JointObservation, t: float,
                                 line: int, y):
    """Density of one line at ``t`` given both lines at ``start``, in that line's units."""
    if not start.t < t <= config.T:
        raise ValueError("need start.t < t <= T")
    law = master_law(config, prior, start)
    if line == 1:
        return _increment_density(law, t - start.t, np.asarray(y, dtype=float) - start.xi1)
    if line == 2:
        k2 = config.k**2
        return _increment_density(law, config.lam * (t - start.t), (np.asarray(y, dtype=float) - start.xi2) / k2) / k2
    raise ValueError("line must be 1 or 2")


def _increment_density(law: ConditionalLaw, tau: float, d):
    """Density of the master increment over ``tau`` after the anchor of ``law``."""
    X = law.xi
    H = law.params.T - law.s
    c = law.params.c
    ds = np.atleast_1d(d)
    out = np.zeros(ds.shape)
    for i, dv in enumerate(ds):
        if dv <= 0:
            continue
        if tau >= H:
            out[i] = float(law.pdf(X + dv))
            continue
        res = law.expectation(lambda z, dv=dv: _bridge_logpdf(c, tau, H, dv, np.asarray(z) - X), lower=X + dv)
        out[i] = res.value
    return out[0] if np.ndim(d) == 0 else out


def _increment_cdf(law: ConditionalLaw, tau: float, d: float) -> float:
    """``P[increment over tau <= d]`` after the anchor of ``law``."""
    if d <= 0:
        return 0.0
    X = law.xi
    H = law.params.T - law.s
    c = law.params.c
    if tau >= H:
        return law.cdf(X + d)
    with np.errstate(divide="ignore"):
        tail = law.expectation(lambda z: np.log(np.atleast_1d(_bridge_cdf(c, tau, H, d, np.asarray(z) - X))),
                               lower=X + d).value
    return min(max(law.cdf(X + d) + tail, 0.0), 1.0)


def _increment_quantile(law: ConditionalLaw, tau: float, p: float, tol: float = 1e-8) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    H = law.params.T - law.s
    hi = max(tau / H, 1e-3) * max(float(law.prior.ppf(0.5)), 1e-12)
    while _increment_cdf(law, tau, hi) < p:
        hi *= 4.0
    lo = hi
    while _increment_cdf(law, tau, lo) > p and lo > 1e-300:
        lo *= 0.25
    a, b = math.log(lo), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (a + b)
        F = _increment_cdf(law, tau, math.exp(mid))
        if abs(F - p) <= tol or b - a < 1e-14:
            return math.exp(mid)
        if F < p:
            a = mid
        else:
            b = mid
    return math.exp(0.5 * (a + b))


def _increment_moments(law: ConditionalLaw, tau: float) -> tuple[float, float]:
    """Mean and second moment of the master increment over ``tau`` after the anchor."""
    X, v = law.xi, law.s
    Ts, c = law.params.T, law.params.c
    H = Ts - v
    U = best_estimate(law)
    mean = tau / H * (U - X)
    if tau >= H:
        second = conditional_second_moment(law) - 2.0 * X * U + X * X
        return mean, second
    with np.errstate(divide="ignore"):
        second = law.expectation(lambda z: np.log(np.atleast_1d(_increment_second_moment(c, v, v + tau, Ts, X, z)))).value
    return mean, second


def best_estimates(config: MultiLineConfig, prior: PriorLaw, obs: JointObservation) -> tuple[float, float]:
    """``(U1, U2)`` from one conditional law of the master (two one-dimensional integrals).

    With ``D = T* - (1 + lam) t``, ``X = x1 + x2/k^2`` and ``E`` the master best estimate,
    ``U1 = x1 + (T - t)(E - X)/D`` and ``U2 = x2 + k^2 (T* - T - lam t)(E - X)/D``.
    """
    law = master_law(config, prior, obs)
    E = best_estimate(law)
    v, X = _master_point(config, obs)
    D = config.T_star - v
    # window / D first, so at t = 0 these are (T/T*) E and k^2 ((T*-T)/T*) E to the bit
    U1 = obs.xi1 + (line_increment_window(config, 1, obs.t) / D) * (E - X)
    U2 = obs.xi2 + config.k**2 * ((line_increment_window(config, 2, obs.t) / D) * (E - X))
    return U1, U2


def line_reports(config: MultiLineConfig, prior: PriorLaw, obs: JointObservation) -> tuple[ReservingReport, ReservingReport]:
    """Per-line best estimate, reserve, variance and quantiles of the ultimate loss."""
    law = master_law(config, prior, obs)
    if not all(prior.moments().finite_flags):
        raise InfiniteMomentError("the master prior needs a finite second moment")
    reports = []
    for line, paid in ((1, obs.xi1), (2, obs.xi2)):
        tau = line_increment_window(config, line, obs.t)
        scale = _line_scale(config, line)
        m1, m2 = _increment_moments(law, tau)
        qs = [paid + scale * _increment_quantile(law, tau, p) for p in REPORT_QUANTILES]
        qs = [float(q) for q in np.maximum.accumulate(qs)]
        U = paid + scale * m1
        var = max(scale**2 * (m2 - m1 * m1), 0.0)
        reports.append(ReservingReport(obs.t, paid, U, U - paid, var, *qs, quad_err=law.quad_error))
    return reports[0], reports[1]


@dataclass(frozen=True)
class CorrelationComponents:
    mean_1: float
    mean_2: float
    second_moment_1: float
    second_moment_2: float
    cross_moment: float
    C: float
    correlation: float


def _c_integral(config: MultiLineConfig, prior: PriorLaw) -> float:
    """``c sqrt(2 pi) int z^{3/2} e^{c^2 T*^2/(2z)} Phi(-c T* / sqrt z) p(z) dz``."""
    c, Ts = config.c, config.T_star

    def log_g(z):
        z = np.asarray(z, dtype=float)
        u = c * Ts / np.sqrt(z)
        # e^{u^2/2} Phi(-u) is the scaled complementary error function
        return 1.5 * np.log(z) + np.log(mills(u))

    return c * math.sqrt(2.0 * math.pi) * integrate_against(prior, log_g, 0.0).value


def correlation_components(config: MultiLineConfig, prior: PriorLaw) -> CorrelationComponents:
    """Means, second moments and cross moment of the two line terminals.

    With ``m1, m2`` the prior moments and ``C`` the integral above:
    ``E[X1^2] = (T/T*)(m2 - (T* - T) C)``, ``E[X2^2] = k^4 (1 - T/T*)(m2 - T C)`` and
    ``E[X1 X2] = k^2 (T/T*)(T* - T) C``.
    """
    mom = prior.moments()
    if not all(mom.finite_flags):
        raise InfiniteMomentError("a priori correlation needs a finite second moment")
    T, Ts, k = config.T, config.T_star, config.k
    m1, m2 = mom.mean, mom.second_moment
    C = _c_integral(config, prior)
    r = T / Ts
    e1 = r * m1
    e2 = k**2 * (1.0 - r) * m1
    s1 = r * (m2 - (Ts - T) * C)
    s2 = k**4 * (1.0 - r) * (m2 - T * C)
    cross = k**2 * r * (Ts - T) * C
    corr = (cross - e1 * e2) / math.sqrt((s1 - e1 * e1) * (s2 - e2 * e2))
    return CorrelationComponents(e1, e2, s1, s2, cross, C, corr)


def a_priori_correlation(config: MultiLineConfig, prior: PriorLaw) -> float:
    return correlation_components(config, prior).correlation


def split_master_paths(config: MultiLineConfig, master_paths: np.ndarray, times: np.ndarray):
    """Cut simulated master paths into the two line paths on the line-1 time grid.

    ``times`` is the master grid on ``[0, T*]``; returns ``(t, line1, line2)``
    on the grid points ``t`` in ``[0, T]`` for which ``T + lam t`` is also on
    the master grid.
    """
    times = np.asarray(times, dtype=float)
    T, lam, k2 = config.T, config.lam, config.k**2
    tol = 1e-12 * config.T_star

    def index(t):
        i = int(np.argmin(np.abs(times - t)))
        return i if abs(times[i] - t) <= tol else None

    iT = index(T)
    if iT is None:
        raise ValueError("T is not on the master grid")
    keep_t, i1, i2 = [], [], []
    for i, t in enumerate(times):
        if t > T + tol:
            break
        j = index(T + lam * t)
        if j is not None:
            keep_t.append(t)
            i1.append(i)
            i2.append(j)
    line1 = master_paths[:, i1]
    line2 = k2 * (master_paths[:, i2] - master_paths[:, [iT]])
    return np.array(keep_t), line1, line2
