"""Vectorised, globally adaptive Gauss-Kronrod (G10/K21) quadrature.

Integrands are supplied in log form so that integrals whose value is far
outside double range (tail probabilities at ``exp(-1000)``, say) are still
returned as a finite log magnitude. An integrand maps an array of abscissae
to either an array of log magnitudes or a ``(log_magnitude, sign)`` pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = ["QuadResult", "QuadratureError", "integrate_log", "GK_NODES", "GK_WEIGHTS", "GAUSS_WEIGHTS"]

# QUADPACK qk21 abscissae (nonnegative half) and weights
_XGK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss weights aligned with GK_NODES (zero at Kronrod-only nodes)
GAUSS_WEIGHTS = np.zeros(21)
for _i, _w in enumerate(_WG):
    GAUSS_WEIGHTS[2 * _i + 1] = _w
    GAUSS_WEIGHTS[19 - 2 * _i] = _w


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach its tolerance."""

    def __init__(self, message: str, value: float, error: float):
        super().__init__(f"{message} (estimate={value:.6g}, error={error:.3g})")
        self.value = value
        self.error = error


@dataclass(frozen=True)
class QuadResult:
    """Integral ``sign * exp(log_abs)`` with a relative error estimate."""

    log_abs: float
    sign: int
    rel_error: float
    nevals: int

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_abs)

    @property
    def error(self) -> float:
        """Absolute error estimate."""
        if self.sign == 0:
            return 0.0
        return self.rel_error * abs(self.value)

    def __float__(self):
        return self.value


def _split(out):
    if isinstance(out, tuple):
        logm, sign = out
        return np.asarray(logm, dtype=float), np.asarray(sign, dtype=float)
    logm = np.asarray(out, dtype=float)
    return logm, np.where(np.isneginf(logm), 0.0, 1.0)


def integrate_log(
    log_integrand: Callable,
    segments: Sequence[tuple[float, float]],
    tail_start: float | None = None,
    *,
    rtol: float = 1e-11,
    max_intervals: int = 4000,
    raise_on_failure: bool = True,
) -> QuadResult:
    """Integrate ``exp(log_integrand(z))`` over finite segments plus an optional tail.

    ``tail_start`` (``P > 0``) adds ``[P, inf)`` through ``z = P / u^2``, which
    turns power tails ``z^{-alpha}`` with ``alpha >= 3/2`` into bounded
    integrands on ``(0, 1]``.
    """
    # each interval is (a, b, kind) with kind 0 = plain, 1 = tail map
    a_list, b_list, k_list = [], [], []
    for a, b in segments:
        if b > a:
            a_list.append(a)
            b_list.append(b)
            k_list.append(0)
    if tail_start is not None:
        if tail_start <= 0:
            raise ValueError("tail_start must be positive")
        # split the unit interval once so the far tail gets its own panel
        for a, b in ((0.0, 0.25), (0.25, 1.0)):
            a_list.append(a)
            b_list.append(b)
            k_list.append(1)
    if not a_list:
        return QuadResult(-math.inf, 0, 0.0, 0)
    A = np.array(a_list)
    B = np.array(b_list)
    K = np.array(k_list)
    P = float(tail_start) if tail_start is not None else 1.0

    def evaluate(A, B, K):
        half = 0.5 * (B - A)
        mid = 0.5 * (B + A)
        x = mid[:, None] + half[:, None] * GK_NODES[None, :]
        tail = K == 1
        z = x.copy()
        logjac = np.log(np.broadcast_to(half[:, None], x.shape)).copy()
        if np.any(tail):
            u = x[tail]
            z[tail] = P / (u * u)
            logjac[tail] += math.log(2.0 * P) - 3.0 * np.log(u)
        logm, sign = _split(log_integrand(z.ravel()))
        logm = logm.reshape(x.shape) + logjac
        sign = sign.reshape(x.shape)
        logm = np.where(sign == 0, -np.inf, logm)
        return logm, sign

    logm, sign = evaluate(A, B, K)
    nevals = logm.size
    finite = logm[np.isfinite(logm)]
    if finite.size == 0:
        shift = 0.0
    else:
        shift = float(finite.max())
    if np.any(np.isnan(logm)):
        raise QuadratureError("integrand returned NaN", math.nan, math.inf)

    def panel(logm, sign):
        vals = sign * np.exp(logm - shift)
        kron = vals @ GK_WEIGHTS
        gauss = vals @ GAUSS_WEIGHTS
        mean = kron / 2.0
        resasc = np.abs(vals - mean[:, None]) @ GK_WEIGHTS
        raw = np.abs(kron - gauss)
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = resasc * np.minimum(1.0, (200.0 * raw / resasc) ** 1.5)
        err = np.where(resasc > 0, scaled, raw)
        # roundoff floor, as in QUADPACK
        resabs = np.abs(vals) @ GK_WEIGHTS
        err = np.maximum(err, 50.0 * np.finfo(float).eps * resabs)
        return kron, err, resabs

    val, err, mass = panel(logm, sign)
    converged = False
    for _ in range(200):
        total = val.sum()
        tot_err = err.sum()
        # the floor sits above the per-panel roundoff floor, so cancelling integrands can converge
        tol = max(rtol * abs(total), 100.0 * np.finfo(float).eps * mass.sum(), 1e-300)
        if tot_err <= tol:
            converged = True
            break
        if len(A) >= max_intervals:
            break
        # bisect every panel whose error exceeds its share of the budget
        share = tol / len(A)
        bad = err > share
        if not np.any(bad):
            bad = err >= err.max()
        mid = 0.5 * (A[bad] + B[bad])
        newA = np.concatenate([A[bad], mid])
        newB = np.concatenate([mid, B[bad]])
        newK = np.concatenate([K[bad], K[bad]])
        lm, sg = evaluate(newA, newB, newK)
        if np.any(np.isnan(lm)):
            raise QuadratureError("integrand returned NaN", math.nan, math.inf)
        nevals += lm.size
        top = lm[np.isfinite(lm)]
        if top.size and top.max() > shift + 300.0:
            # refinement found a much larger peak: rebase the running sums
            new_shift = float(top.max())
            val = val * math.exp(shift - new_shift)
            err = err * math.exp(shift - new_shift)
            mass = mass * math.exp(shift - new_shift)
            shift = new_shift
        nv, ne, nm = panel(lm, sg)
        keep = ~bad
        A = np.concatenate([A[keep], newA])
        B = np.concatenate([B[keep], newB])
        K = np.concatenate([K[keep], newK])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        mass = np.concatenate([mass[keep], nm])
    total = float(val.sum())
    tot_err = float(err.sum())
    if total == 0.0:
        res = QuadResult(-math.inf, 0, 0.0 if tot_err == 0 else math.inf, nevals)
    else:
        res = QuadResult(math.log(abs(total)) + shift, 1 if total > 0 else -1, tot_err / abs(total), nevals)
    if not converged and raise_on_failure and tot_err > 1e-6 * max(abs(total), float(mass.sum())):
        raise QuadratureError("adaptive quadrature did not converge", res.value, res.error)
    return res
