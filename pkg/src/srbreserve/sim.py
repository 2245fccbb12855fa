"""Dyadic-bisection simulation of paid-claims paths.

A path on ``[s, T]`` is built by drawing the terminal value, then filling
midpoints level by level from the bridge midpoint law. Every uniform comes
from a Philox-4x32-10 counter keyed by the seed, with counter
``(path mod 2^32, path div 2^32, level, position)``; a path therefore depends
only on its index and the seed, never on how the work was scheduled.
"""
from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

from .bridge import _bridge_cdf, midpoint_from_normals
from .lrb import ConditionalLaw, Observation, PosteriorSampler
from .prior import GIGPrior, PriorLaw, TabulatedPrior
from .stable import BridgeParams

__all__ = [
    "philox4x32",
    "counter_uniforms",
    "PathEnsemble",
    "terminal_sampler",
    "simulate_from_terminal",
    "simulate_paths",
    "simulate_conditional",
    "sample_paid_at_dates",
    "write_ensemble_csv",
    "write_ensemble_binary",
    "read_ensemble_binary",
]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)

DEFAULT_DEPTH = 10
# counter levels for date-marginal draws sit far above any bisection level
_DATE_LEVEL_BASE = 1 << 20


def philox4x32(counter, key, rounds: int = 10):
    """Philox-4x32 block function, vectorised over the leading axis.

    ``counter`` has shape ``(..., 4)`` and ``key`` shape ``(2,)`` or ``(..., 2)``;
    words are held in ``uint64`` arrays with values below ``2^32``.
    """
    ctr = np.asarray(counter, dtype=np.uint64)
    k = np.asarray(key, dtype=np.uint64)
    x0, x1, x2, x3 = (ctr[..., i].copy() for i in range(4))
    k0 = np.broadcast_to(k[..., 0], x0.shape).copy()
    k1 = np.broadcast_to(k[..., 1], x0.shape).copy()
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * x0
        p1 = _M1 * x2
        hi0, lo0 = p0 >> _SHIFT, p0 & _MASK
        hi1, lo1 = p1 >> _SHIFT, p1 & _MASK
        x0, x1, x2, x3 = hi1 ^ x1 ^ k0, lo1, hi0 ^ x3 ^ k1, lo0
    return np.stack([x0, x1, x2, x3], axis=-1)


def _key(seed: int):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.array([seed & 0xFFFFFFFF, seed >> 32], dtype=np.uint64)


def counter_uniforms(seed: int, paths, level: int, positions):
    """Uniforms in ``(0, 1)`` for each ``(path, position)`` pair at ``level``.

    Two 32-bit output words form a 53-bit integer ``m``; the uniform is
    ``(m + 1/2) / 2^53``, so neither 0 nor 1 can occur.
    """
    paths = np.asarray(paths, dtype=np.uint64)
    positions = np.asarray(positions, dtype=np.uint64)
    paths, positions = np.broadcast_arrays(paths, positions)
    ctr = np.stack([paths & _MASK, paths >> _SHIFT,
                    np.full(paths.shape, level, dtype=np.uint64), positions], axis=-1)
    out = philox4x32(ctr, _key(seed))
    m = (out[..., 0] << np.uint64(21)) | (out[..., 1] >> np.uint64(11))
    return (m.astype(np.float64) + 0.5) / 2.0**53


@dataclass(frozen=True)
class PathEnsemble:
    """Paths on the dyadic grid ``start + i (T - start) 2^{-depth}``, stored as levels."""

    depth: int
    paths: np.ndarray
    seed: int
    count: int
    times: np.ndarray
    start: float = 0.0

    def at(self, t: float) -> np.ndarray:
        """Column for grid time ``t``."""
        idx = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[idx], t, rtol=0, atol=1e-12 * max(1.0, abs(t))):
            raise ValueError(f"{t} is not on the simulation grid")
        return self.paths[:, idx]

    @property
    def terminal(self) -> np.ndarray:
        return self.paths[:, -1]

    def quantile_summary(self, probs=(0.05, 0.25, 0.5, 0.75, 0.95)) -> np.ndarray:
        """Rows ``(t, mean, q_1, ..., q_m)`` for each grid time."""
        qs = np.quantile(self.paths, probs, axis=0).T
        return np.column_stack([self.times, self.paths.mean(axis=0), qs])


def terminal_sampler(law: ConditionalLaw):
    """Map uniforms to draws of the ultimate loss under ``law``.

    Families with an explicit quantile function use it; GIG and tabulated
    priors, and every anchored law, use a tabulated inverse of the
    distribution function.
    """
    if law.is_prior and not isinstance(law.prior, (GIGPrior, TabulatedPrior)):
        return law.prior.ppf
    if law.is_prior and isinstance(law.prior, TabulatedPrior):
        return law.prior.ppf
    return PosteriorSampler(law).ppf


def _fill(c, duration, terminal, start_value, depth, seed, path_ids):
    n = len(path_ids)
    m = 2**depth
    out = np.empty((n, m + 1))
    out[:, 0] = start_value
    out[:, -1] = terminal
    for level in range(1, depth + 1):
        step = m >> (level - 1)
        half = step >> 1
        npos = 2 ** (level - 1)
        left = out[:, 0:m:step]
        right = out[:, step::step]
        u = counter_uniforms(seed, path_ids[:, None], level, np.arange(npos, dtype=np.uint64)[None, :])
        z = special.ndtri(u)
        out[:, half::step] = midpoint_from_normals(c, duration / npos, left, right, z)
    return out


def simulate_from_terminal(params: BridgeParams, terminal, depth: int, seed: int, *,
                           start: float = 0.0, start_value: float = 0.0, path_offset: int = 0) -> PathEnsemble:
    """Bisect bridges from ``(start, start_value)`` to the given terminal values."""
    terminal = np.asarray(terminal, dtype=float)
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if np.any(terminal < start_value):
        raise ValueError("terminal values must not be below the starting value")
    ids = np.arange(path_offset, path_offset + terminal.size, dtype=np.uint64)
    paths = _fill(params.c, params.T - start, terminal, start_value, depth, seed, ids)
    times = start + (params.T - start) * np.arange(2**depth + 1) / 2**depth
    return PathEnsemble(depth, paths, int(seed), int(terminal.size), times, start)


def simulate_conditional(params: BridgeParams, law: ConditionalLaw, depth: int, count: int, seed: int,
                         *, workers: int = 1, chunk: int = 8192) -> PathEnsemble:
    """Simulate the remaining development on ``[s, T]`` given ``law.anchor``."""
    if depth < 1 or count < 1:
        raise ValueError("depth and count must be positive")
    if law.params != params:
        raise ValueError("law and params disagree")
    ppf = terminal_sampler(law)
    s, x = law.anchor.s, law.anchor.xi

    def run(lo):
        hi = min(lo + chunk, count)
        ids = np.arange(lo, hi, dtype=np.uint64)
        u = counter_uniforms(seed, ids, 0, 0)
        terminal = np.maximum(np.asarray(ppf(u), dtype=float), x)
        return _fill(params.c, params.T - s, terminal, x, depth, seed, ids)

    starts = range(0, count, chunk)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, starts))
    else:
        blocks = [run(lo) for lo in starts]
    paths = np.vstack(blocks)
    times = s + (params.T - s) * np.arange(2**depth + 1) / 2**depth
    return PathEnsemble(depth, paths, int(seed), int(count), times, s)


def simulate_paths(params: BridgeParams, prior: PriorLaw, depth: int = DEFAULT_DEPTH, count: int = 1,
                   seed: int = 0, *, workers: int = 1, chunk: int = 8192) -> PathEnsemble:
    """Paths from ``(0, 0)`` with terminal law ``prior``."""
    law = ConditionalLaw(prior, Observation(0.0, 0.0), params)
    return simulate_conditional(params, law, depth, count, seed, workers=workers, chunk=chunk)


def _invert_bridge_cdf(c, t, T, w, u, iterations=64):
    """Vectorised bisection for ``y`` in ``[0, w]`` with ``F_{tT}(y; w) = u``."""
    lo = np.zeros_like(w)
    hi = w.copy()
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = _bridge_cdf(c, t, T, mid, w) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def sample_paid_at_dates(params: BridgeParams, law: ConditionalLaw, dates, count: int, seed: int) -> np.ndarray:
    """Joint draws of the paid amount at increasing ``dates`` in ``(s, T]``.

    The terminal value uses the same counter as :func:`simulate_conditional`,
    so path ``i`` here ends where path ``i`` there ends. Each later date is
    drawn from the bridge between the previous date and the terminal value
    by inverting its distribution function.
    """
    dates = [float(d) for d in dates]
    s, x, T = law.anchor.s, law.anchor.xi, params.T
    if not dates or any(b <= a for a, b in zip([s] + dates[:-1], dates)) or dates[-1] > T:
        raise ValueError("dates must increase strictly within (s, T]")
    ids = np.arange(count, dtype=np.uint64)
    terminal = np.maximum(np.asarray(terminal_sampler(law)(counter_uniforms(seed, ids, 0, 0)), dtype=float), x)
    out = np.empty((count, len(dates)))
    prev_t, prev = s, np.full(count, x)
    for j, d in enumerate(dates):
        if d == T:
            cur = terminal
        else:
            u = counter_uniforms(seed, ids, _DATE_LEVEL_BASE + j, 0)
            cur = prev + _invert_bridge_cdf(params.c, d - prev_t, T - prev_t, terminal - prev, u)
        out[:, j] = cur
        prev_t, prev = d, cur
    return out


def write_ensemble_csv(ens: PathEnsemble, path) -> None:
    """Long format with header ``path_id,t,value``, preceded by a ``#`` metadata line."""
    path = Path(path)
    n, m = ens.paths.shape
    ids = np.repeat(np.arange(n), m)
    ts = np.tile(ens.times, n)
    with path.open("w", newline="") as fh:
        fh.write(f"# count={ens.count} depth={ens.depth} seed={ens.seed} start={float(ens.start)!r}\n")
        fh.write("path_id,t,value\n")
        for i, t, v in zip(ids, ts, ens.paths.ravel()):
            fh.write(f"{i},{float(t)!r},{float(v)!r}\n")


def write_ensemble_binary(ens: PathEnsemble, path) -> None:
    """``[count:u64][depth:u64][seed:u64]`` then ``count x (2^depth + 1)`` little-endian f64, row-major."""
    with Path(path).open("wb") as fh:
        fh.write(struct.pack("<QQQ", ens.count, ens.depth, ens.seed))
        fh.write(np.ascontiguousarray(ens.paths, dtype="<f8").tobytes())


def read_ensemble_binary(path, T: float, start: float = 0.0) -> PathEnsemble:
    data = Path(path).read_bytes()
    count, depth, seed = struct.unpack_from("<QQQ", data, 0)
    values = np.frombuffer(data, dtype="<f8", offset=24)
    if values.size != count * (2**depth + 1):
        raise ValueError("binary ensemble has an unexpected length")
    paths = values.reshape(count, 2**depth + 1).astype(float)
    times = start + (T - start) * np.arange(2**depth + 1) / 2**depth
    return PathEnsemble(int(depth), paths, int(seed), int(count), times, start)
