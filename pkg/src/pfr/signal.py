"""Periodic bounded control signals.

Three kinds are supported:

- ``PiecewiseConstant``: right-continuous step function on ``[0, period)``,
  extended periodically.
- ``Steady``: constant value.
- ``Sinusoid``: ``mean + amplitude * sin(2*pi*t/period + phase)``.

Besides evaluation the module provides the integral quantities needed by the
cost functionals: plain and flow-weighted means, the cumulative flow
``V(t) = int_0^t v`` with its inverse, and measures of level sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

ArrayLike = Union[float, np.ndarray]

# Inverse of an analytic cumulative flow is resolved to this many seconds.
INVERSE_XTOL = 1e-13


def _wrap(t: ArrayLike, period: float) -> np.ndarray:
    tw = np.mod(np.asarray(t, dtype=float), period)
    # np.mod can return `period` itself for tiny negative inputs
    return np.where(tw >= period, tw - period, tw)


def _scalar_or_array(out: np.ndarray, t: ArrayLike):
    if np.ndim(t) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class PiecewiseConstant:
    """Step signal taking ``values[i]`` on ``[breakpoints[i], breakpoints[i+1])``."""

    period: float
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    kind = "piecewise_constant"

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        if not self.period > 0:
            raise ValueError(f"period must be > 0, got {self.period}")
        if len(bps) != len(vals) or not bps:
            raise ValueError("breakpoints and values must be non-empty and of equal length")
        if bps[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if any(b1 <= b0 for b0, b1 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if bps[-1] >= self.period:
            raise ValueError("breakpoints must lie in [0, period)")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("values must be finite")

    @property
    def bounds(self) -> tuple[float, float]:
        return min(self.values), max(self.values)

    def pieces(self) -> list[tuple[float, float, float]]:
        """``(start, end, value)`` triples covering one period."""
        ends = self.breakpoints[1:] + (self.period,)
        return list(zip(self.breakpoints, ends, self.values))

    def __call__(self, t: ArrayLike):
        tw = _wrap(t, self.period)
        idx = np.searchsorted(self.breakpoints, tw, side="right") - 1
        out = np.asarray(self.values)[idx]
        return _scalar_or_array(out, t)


@dataclass(frozen=True)
class Steady:
    period: float
    value: float

    kind = "steady"

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be > 0, got {self.period}")

    @property
    def bounds(self) -> tuple[float, float]:
        return self.value, self.value

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (0.0,)

    @property
    def values(self) -> tuple[float, ...]:
        return (float(self.value),)

    def pieces(self) -> list[tuple[float, float, float]]:
        return [(0.0, self.period, float(self.value))]

    def __call__(self, t: ArrayLike):
        out = np.full(np.shape(t), float(self.value))
        return _scalar_or_array(out, t)


@dataclass(frozen=True)
class Sinusoid:
    period: float
    mean: float
    amplitude: float
    phase: float = 0.0

    kind = "sinusoid"

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be > 0, got {self.period}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0; use phase for sign")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / self.period

    @property
    def bounds(self) -> tuple[float, float]:
        return self.mean - self.amplitude, self.mean + self.amplitude

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def pieces(self):
        return None

    def __call__(self, t: ArrayLike):
        t = np.asarray(t, dtype=float)
        out = self.mean + self.amplitude * np.sin(self.omega * t + self.phase)
        return _scalar_or_array(out, t)


PeriodicSignal = Union[PiecewiseConstant, Steady, Sinusoid]


def is_piecewise(signal: PeriodicSignal) -> bool:
    return isinstance(signal, (PiecewiseConstant, Steady))


def eval_signal(signal: PeriodicSignal, t: ArrayLike):
    return signal(t)


def from_intervals(period: float, intervals: Sequence[tuple[float, float, float]]) -> PiecewiseConstant:
    """Build a step signal from ``(start, end, value)`` triples tiling ``[0, period)``.

    Empty intervals are dropped and equal neighbours merged.
    """
    pieces = sorted((float(a), float(b), float(v)) for a, b, v in intervals if b > a)
    if not pieces:
        raise ValueError("no non-empty intervals")
    cursor = 0.0
    for a, b, _ in pieces:
        if not math.isclose(a, cursor, rel_tol=0.0, abs_tol=1e-12 * period):
            raise ValueError(f"intervals must tile [0, {period}) without gaps; gap/overlap at {a}")
        cursor = b
    if not math.isclose(cursor, period, rel_tol=0.0, abs_tol=1e-12 * period):
        raise ValueError(f"intervals end at {cursor}, expected {period}")
    bps, vals = [], []
    for a, _, v in pieces:
        if vals and vals[-1] == v:
            continue
        bps.append(a)
        vals.append(v)
    bps[0] = 0.0
    return PiecewiseConstant(period, tuple(bps), tuple(vals))


def mean(signal: PeriodicSignal) -> float:
    """Time average over one period (exact for every supported kind)."""
    if isinstance(signal, Sinusoid):
        return float(signal.mean)
    if isinstance(signal, Steady):
        return float(signal.value)
    total = math.fsum((b - a) * v for a, b, v in signal.pieces())
    return total / signal.period


def _check_same_period(a: PeriodicSignal, b: PeriodicSignal):
    if not math.isclose(a.period, b.period, rel_tol=1e-12, abs_tol=0.0):
        raise ValueError(f"period mismatch: {a.period} vs {b.period}")


def merged_pieces(a: PeriodicSignal, b: PeriodicSignal) -> list[tuple[float, float, float, float]]:
    """Common refinement of two step signals: ``(start, end, a_value, b_value)``."""
    _check_same_period(a, b)
    cuts = sorted(set(a.breakpoints) | set(b.breakpoints))
    ends = cuts[1:] + [a.period]
    out = []
    for s, e in zip(cuts, ends):
        mid = 0.5 * (s + e)
        out.append((s, e, float(a(mid)), float(b(mid))))
    return out


def weighted_mean(c: PeriodicSignal, v: PeriodicSignal) -> float:
    """``(1/period) * int_0^period c(t) v(t) dt``."""
    _check_same_period(c, v)
    if is_piecewise(c) and is_piecewise(v):
        total = math.fsum((e - s) * cv * vv for s, e, cv, vv in merged_pieces(c, v))
        return total / c.period
    if isinstance(c, Sinusoid) and isinstance(v, Sinusoid):
        # product of two sines at the same frequency averages to cos(phase difference)/2
        return c.mean * v.mean + 0.5 * c.amplitude * v.amplitude * math.cos(c.phase - v.phase)
    if isinstance(c, Steady) or isinstance(v, Steady):
        return mean(c) * mean(v)
    points = sorted(set(c.breakpoints) | set(v.breakpoints))
    val, _ = quad(lambda t: c(t) * v(t), 0.0, c.period, points=points[1:] or None,
                  epsabs=0.0, epsrel=1e-12, limit=200)
    return val / c.period


def measure_level_sets(signal: PeriodicSignal, threshold: float) -> tuple[float, float]:
    """Measures of ``{t in [0, period): signal(t) >= threshold}`` and of its complement."""
    tau = signal.period
    if isinstance(signal, Sinusoid):
        if signal.amplitude == 0.0:
            above = tau if signal.mean >= threshold else 0.0
        else:
            s = (threshold - signal.mean) / signal.amplitude
            if s <= -1.0:
                above = tau
            elif s > 1.0:
                above = 0.0
            else:
                above = tau * (0.5 - math.asin(s) / math.pi)
        return above, tau - above
    above = math.fsum(b - a for a, b, v in signal.pieces() if v >= threshold)
    return above, tau - above


@dataclass(frozen=True)
class CumulativeFlow:
    """``V(t) = int_0^t v`` for a positive periodic flow-rate.

    For step flows ``knots``/``levels`` hold the exact piecewise-affine
    representation over one period; analytic flows are inverted numerically.
    """

    base: PeriodicSignal
    knots: tuple[float, ...]
    levels: tuple[float, ...]
    increment: float

    @property
    def period(self) -> float:
        return self.base.period

    def _local(self, tl: np.ndarray) -> np.ndarray:
        if is_piecewise(self.base):
            knots = np.asarray(self.knots)
            idx = np.clip(np.searchsorted(knots, tl, side="right") - 1, 0, len(knots) - 2)
            rates = np.asarray(self.base.values)[idx]
            return np.asarray(self.levels)[idx] + rates * (tl - knots[idx])
        b = self.base
        w = b.omega
        return b.mean * tl - (b.amplitude / w) * (np.cos(w * tl + b.phase) - math.cos(b.phase))

    def __call__(self, t: ArrayLike):
        t = np.asarray(t, dtype=float)
        q = np.floor(t / self.period)
        tl = t - q * self.period
        out = q * self.increment + self._local(tl)
        return _scalar_or_array(out, t)

    def inverse(self, y: ArrayLike):
        y = np.asarray(y, dtype=float)
        q = np.floor(y / self.increment)
        yl = y - q * self.increment
        if is_piecewise(self.base):
            levels = np.asarray(self.levels)
            idx = np.clip(np.searchsorted(levels, yl, side="right") - 1, 0, len(levels) - 2)
            rates = np.asarray(self.base.values)[idx]
            tl = np.asarray(self.knots)[idx] + (yl - levels[idx]) / rates
        else:
            flat = np.atleast_1d(yl)
            tl = np.empty_like(flat)
            for i, target in enumerate(flat):
                if target <= 0.0:
                    tl[i] = 0.0
                    continue
                tl[i] = brentq(lambda s: float(self._local(np.asarray(s))) - target,
                               0.0, self.period, xtol=INVERSE_XTOL, rtol=4 * np.finfo(float).eps)
            tl = tl.reshape(np.shape(yl))
        out = q * self.period + tl
        return _scalar_or_array(out, y)


def cumulative(flow: PeriodicSignal) -> CumulativeFlow:
    lo, _ = flow.bounds
    if not lo > 0:
        raise ValueError(f"flow-rate must be strictly positive, minimum is {lo}")
    if is_piecewise(flow):
        knots = [0.0]
        levels = [0.0]
        for a, b, v in flow.pieces():
            knots.append(b)
            levels.append(levels[-1] + (b - a) * v)
        # exact per-period increment, independent of summation order
        increment = math.fsum((b - a) * v for a, b, v in flow.pieces())
        levels[-1] = increment
        return CumulativeFlow(flow, tuple(knots), tuple(levels), increment)
    return CumulativeFlow(flow, (), (), flow.mean * flow.period)


def inverse(cf: CumulativeFlow, y: ArrayLike):
    return cf.inverse(y)
