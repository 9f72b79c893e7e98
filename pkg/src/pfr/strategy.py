"""Isoperimetric constraint sets and constructive bang-bang strategies.

Single input: the inlet concentration ``c`` is tau-periodic, bounded by
``[c_min, c_max]`` and has mean ``c_mean``.

Two inputs: additionally the flow-rate ``v`` is bounded by ``[v_min, v_max]``,
the flux ``c*v`` averages to ``c_mean*v_mean`` and ``int_0^tau v = L``
(residence time equal to the period).

Measure formulas accept ``fractions.Fraction`` inputs unchanged, which the
tests use to check them in exact arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .signal import (
    PeriodicSignal,
    PiecewiseConstant,
    from_intervals,
    is_piecewise,
    mean,
    merged_pieces,
    weighted_mean,
)

ADMISSIBLE_TOL = 1e-10
# residuals below this count as exact when deciding whether to touch a signal
FIXED_POINT_TOL = 1e-12

Intervals = list[tuple[float, float]]


class InfeasibleSpecError(ValueError):
    pass


@dataclass(frozen=True)
class IsoperimetricSpec:
    tau: float
    c_mean: float
    c_min: float
    c_max: float
    v_mean: Optional[float] = None
    v_min: Optional[float] = None
    v_max: Optional[float] = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not 0 < self.c_min < self.c_max:
            raise ValueError("need 0 < c_min < c_max")
        if not self.c_min <= self.c_mean <= self.c_max:
            raise InfeasibleSpecError("c_mean must lie in [c_min, c_max]")
        flow_fields = (self.v_mean, self.v_min, self.v_max)
        if any(f is not None for f in flow_fields):
            if any(f is None for f in flow_fields):
                raise ValueError("v_mean, v_min and v_max must be given together")
            if not 0 < self.v_min < self.v_max:
                raise ValueError("need 0 < v_min < v_max")
            if not self.v_min <= self.v_mean <= self.v_max:
                raise InfeasibleSpecError("v_mean must lie in [v_min, v_max]")

    @property
    def two_input(self) -> bool:
        return self.v_mean is not None

    @property
    def flux_mean(self) -> float:
        if not self.two_input:
            raise ValueError("spec has no flow-rate data")
        return self.c_mean * self.v_mean

    @property
    def low_measure(self):
        """Time the single-input bang control spends at ``c_min``."""
        return self.tau * (self.c_max - self.c_mean) / (self.c_max - self.c_min)

    @property
    def high_measure(self):
        return self.tau * (self.c_mean - self.c_min) / (self.c_max - self.c_min)

    def check_pair_feasible(self, L) -> None:
        if not self.two_input:
            raise InfeasibleSpecError("two-input construction needs v_mean, v_min, v_max")
        if not self.v_min * self.tau <= L <= self.v_max * self.tau:
            raise InfeasibleSpecError(
                f"L={L} outside [v_min*tau, v_max*tau] = [{self.v_min * self.tau}, {self.v_max * self.tau}]"
            )
        ratio = self.flux_mean * self.tau / L
        if not self.c_min <= ratio <= self.c_max:
            raise InfeasibleSpecError(
                f"c_mean*v_mean*tau/L = {ratio} outside [c_min, c_max] = [{self.c_min}, {self.c_max}]"
            )


@dataclass(frozen=True)
class SingleResidual:
    mean_residual: float
    below_min: bool
    above_max: bool

    @property
    def admissible(self) -> bool:
        return abs(self.mean_residual) <= ADMISSIBLE_TOL and not (self.below_min or self.above_max)

    def as_dict(self) -> dict:
        return {"mean": self.mean_residual, "below_min": self.below_min, "above_max": self.above_max}


@dataclass(frozen=True)
class PairResidual:
    flux_residual: float
    residence_residual: float
    c_out_of_bounds: bool
    v_out_of_bounds: bool

    @property
    def admissible(self) -> bool:
        return (
            abs(self.flux_residual) <= ADMISSIBLE_TOL
            and abs(self.residence_residual) <= ADMISSIBLE_TOL
            and not (self.c_out_of_bounds or self.v_out_of_bounds)
        )

    def as_dict(self) -> dict:
        return {
            "flux": self.flux_residual,
            "residence": self.residence_residual,
            "c_out_of_bounds": self.c_out_of_bounds,
            "v_out_of_bounds": self.v_out_of_bounds,
        }


def _bound_tol(lo, hi) -> float:
    return 1e-12 * max(abs(lo), abs(hi))


def check_admissible_single(c: PeriodicSignal, spec: IsoperimetricSpec) -> SingleResidual:
    lo, hi = c.bounds
    tol = _bound_tol(spec.c_min, spec.c_max)
    return SingleResidual(
        mean_residual=mean(c) - spec.c_mean,
        below_min=lo < spec.c_min - tol,
        above_max=hi > spec.c_max + tol,
    )


def check_admissible_pair(c: PeriodicSignal, v: PeriodicSignal, spec: IsoperimetricSpec, L: float) -> PairResidual:
    if not spec.two_input:
        raise ValueError("pair admissibility needs a two-input spec")
    if not math.isclose(c.period, v.period, rel_tol=1e-12) or not math.isclose(c.period, spec.tau, rel_tol=1e-12):
        raise ValueError("signals and spec must share the same period")
    c_lo, c_hi = c.bounds
    v_lo, v_hi = v.bounds
    ctol = _bound_tol(spec.c_min, spec.c_max)
    vtol = _bound_tol(spec.v_min, spec.v_max)
    return PairResidual(
        flux_residual=weighted_mean(c, v) - spec.flux_mean,
        residence_residual=mean(v) * spec.tau - L,
        c_out_of_bounds=c_lo < spec.c_min - ctol or c_hi > spec.c_max + ctol,
        v_out_of_bounds=v_lo < spec.v_min - vtol or v_hi > spec.v_max + vtol,
    )


# --------------------------------------------------------------------------
# single input


def _cells(period: float, switchings: int) -> list[tuple[float, float]]:
    if switchings < 1:
        raise ValueError("switchings must be >= 1")
    w = period / switchings
    return [(i * w, (i + 1) * w if i + 1 < switchings else period) for i in range(switchings)]


def make_bang_single(
    spec: IsoperimetricSpec,
    switchings: int = 1,
    low_intervals: Optional[Sequence[tuple[float, float]]] = None,
) -> PiecewiseConstant:
    """Bang-bang inlet concentration with the optimal measure split.

    The low set has measure ``tau*(c_max - c_mean)/(c_max - c_min)``.  By
    default the period is cut into ``switchings`` equal cells, each starting
    with its share of ``c_min``; ``switchings=1`` gives ``c_min`` on
    ``[0, tau*)`` and ``c_max`` afterwards.  ``low_intervals`` overrides the
    layout and must have the right total measure.
    """
    tau = spec.tau
    mu_low = spec.low_measure
    if low_intervals is None:
        lows = [(a, a + mu_low * (b - a) / tau) for a, b in _cells(tau, switchings)]
    else:
        lows = sorted((float(a), float(b)) for a, b in low_intervals)
        if any(a < 0 or b > tau or b < a for a, b in lows):
            raise ValueError("low intervals must lie inside [0, tau)")
        if any(b0 > a1 for (_, b0), (a1, _) in zip(lows, lows[1:])):
            raise ValueError("low intervals overlap")
        total = math.fsum(b - a for a, b in lows)
        if not math.isclose(total, mu_low, rel_tol=1e-12, abs_tol=1e-12 * tau):
            raise ValueError(f"low intervals have total measure {total}, need {mu_low}")
    return _two_level(tau, lows, spec.c_min, spec.c_max)


def _two_level(tau: float, marked: Intervals, marked_value: float, other_value: float) -> PiecewiseConstant:
    pieces = []
    cursor = 0.0
    for a, b in marked:
        pieces.append((cursor, a, other_value))
        pieces.append((a, b, marked_value))
        cursor = b
    pieces.append((cursor, tau, other_value))
    return from_intervals(tau, pieces)


# --------------------------------------------------------------------------
# two inputs


def kappa(spec: IsoperimetricSpec, L):
    """Sign of this quantity decides how the concentration sets sit inside the flow sets."""
    cv = spec.flux_mean
    return (
        spec.tau * spec.v_max * (cv - spec.c_max * spec.v_min)
        + spec.tau * spec.v_min * (spec.c_min * spec.v_max - cv)
        + L * (spec.c_max * spec.v_min - spec.c_min * spec.v_max)
    )


@dataclass(frozen=True)
class PairMeasures:
    a_plus: object
    a_minus: object
    b_plus: object
    b_minus: object
    kappa: object
    case: str

    def as_dict(self) -> dict:
        return {
            "a_plus": float(self.a_plus),
            "a_minus": float(self.a_minus),
            "b_plus": float(self.b_plus),
            "b_minus": float(self.b_minus),
        }


def pair_measures(spec: IsoperimetricSpec, L) -> PairMeasures:
    spec.check_pair_feasible(L)
    tau, cv = spec.tau, spec.flux_mean
    dv = spec.v_max - spec.v_min
    dc = spec.c_max - spec.c_min
    b_plus = (L - tau * spec.v_min) / dv
    b_minus = (tau * spec.v_max - L) / dv
    kap = kappa(spec, L)
    if kap <= 0:
        a_plus = (tau * cv - L * spec.c_min) / (spec.v_min * dc)
        a_minus = tau - a_plus
        case = "i"
    else:
        a_minus = (L * spec.c_max - tau * cv) / (spec.v_max * dc)
        a_plus = tau - a_minus
        case = "ii"
    return PairMeasures(a_plus, a_minus, b_plus, b_minus, kap, case)


@dataclass(frozen=True)
class StrategyPair:
    c: PeriodicSignal
    v: PeriodicSignal
    measures: PairMeasures
    a_plus: Intervals = field(default_factory=list)
    b_plus: Intervals = field(default_factory=list)

    @property
    def kappa(self):
        return self.measures.kappa

    @property
    def case_tag(self) -> str:
        return self.measures.case


def make_bang_pair(spec: IsoperimetricSpec, L: float, switchings: int = 1) -> StrategyPair:
    """Bang-bang (concentration, flow-rate) pair meeting both constraints.

    Within each of ``switchings`` equal cells the flow runs at ``v_max``
    first.  In case ``ii`` the low-concentration set is placed at the start
    of the high-flow set; in case ``i`` the high-concentration set sits at
    the start of the low-flow set.  Either way the overlap of high
    concentration with low flow is as large as the constraints allow.
    """
    m = pair_measures(spec, L)
    tau = spec.tau
    b_plus_iv, a_plus_iv, a_minus_iv = [], [], []
    for a, b in _cells(tau, switchings):
        frac = (b - a) / tau
        bp = float(m.b_plus) * frac
        b_plus_iv.append((a, a + bp))
        if m.case == "i":
            a_plus_iv.append((a + bp, a + bp + float(m.a_plus) * frac))
        else:
            low = (a, a + float(m.a_minus) * frac)
            a_minus_iv.append(low)
            a_plus_iv.append((low[1], b))
    v = _two_level(tau, [iv for iv in b_plus_iv if iv[1] > iv[0]], spec.v_max, spec.v_min)
    if m.case == "i":
        c = _two_level(tau, [iv for iv in a_plus_iv if iv[1] > iv[0]], spec.c_max, spec.c_min)
    else:
        c = _two_level(tau, [iv for iv in a_minus_iv if iv[1] > iv[0]], spec.c_min, spec.c_max)
    return StrategyPair(c=c, v=v, measures=m, a_plus=a_plus_iv, b_plus=b_plus_iv)


def interval_overlap(a: Intervals, b: Intervals) -> float:
    total = 0.0
    for a0, a1 in a:
        for b0, b1 in b:
            total += max(0.0, min(a1, b1) - max(a0, b0))
    return total


def complement(intervals: Intervals, tau: float) -> Intervals:
    out, cursor = [], 0.0
    for a, b in sorted(intervals):
        if a > cursor:
            out.append((cursor, a))
        cursor = max(cursor, b)
    if cursor < tau:
        out.append((cursor, tau))
    return out


# --------------------------------------------------------------------------
# threshold classes


@dataclass(frozen=True)
class ClassASplit:
    """Threshold and a split of ``[0, tau)`` with ``c >= threshold`` on ``a_plus``
    and ``c <= threshold`` on ``a_minus``."""

    threshold: float
    a_plus: Intervals
    a_minus: Intervals

    @property
    def measure_plus(self) -> float:
        return math.fsum(b - a for a, b in self.a_plus)


def _sinusoid_upper_set(c, level: float) -> Intervals:
    tau = c.period
    if c.amplitude == 0:
        return [(0.0, tau)] if c.mean >= level else []
    s = (level - c.mean) / c.amplitude
    if s <= -1:
        return [(0.0, tau)]
    if s > 1:
        return []
    lo_angle = math.asin(s)
    hi_angle = math.pi - lo_angle
    # angle = omega t + phase; map back and wrap onto [0, tau)
    t0 = ((lo_angle - c.phase) / c.omega) % tau
    length = (hi_angle - lo_angle) / c.omega
    t1 = t0 + length
    if t1 <= tau:
        return [(t0, t1)]
    return [(0.0, t1 - tau), (t0, tau)]


def classify_class_A(
    c: PeriodicSignal,
    spec: IsoperimetricSpec,
    nu: Optional[float] = None,
    flow: Optional[PeriodicSignal] = None,
    L: Optional[float] = None,
) -> ClassASplit:
    """Find a threshold splitting ``c`` into an upper set of measure ``nu``.

    ``nu`` defaults to ``spec.high_measure`` (single input) or, when ``flow``
    is given, to the high-concentration measure of the bang-bang pair.
    Plateaus at the threshold are split so the upper set has measure
    exactly ``nu``.
    """
    tau = spec.tau
    if flow is None:
        res = check_admissible_single(c, spec)
        if not res.admissible:
            raise ValueError(f"signal is not admissible: {res.as_dict()}")
        if nu is None:
            nu = spec.high_measure
    else:
        if L is None:
            L = mean(flow) * tau
        pres = check_admissible_pair(c, flow, spec, L)
        if not pres.admissible:
            raise ValueError(f"pair is not admissible: {pres.as_dict()}")
        if nu is None:
            nu = float(pair_measures(spec, L).a_plus)
    nu = float(nu)
    if not -1e-12 * tau <= nu <= tau * (1 + 1e-12):
        raise ValueError(f"nu must lie in [0, {tau}]")
    nu = min(max(nu, 0.0), tau)

    if is_piecewise(c):
        return _split_piecewise(c, nu)

    # sinusoid: the upper-set measure tau*(1/2 - asin(s)/pi) inverts in closed form
    thr = c.mean + c.amplitude * math.cos(math.pi * nu / tau)
    upper = [(a, b) for a, b in _sinusoid_upper_set(c, thr) if b - a > 1e-12 * tau]
    return ClassASplit(thr, upper, complement(upper, tau))


def _split_piecewise(c: PeriodicSignal, nu: float) -> ClassASplit:
    tau = c.period
    pieces = c.pieces()
    levels = sorted({v for _, _, v in pieces}, reverse=True)
    eps = 1e-12 * tau
    above = 0.0
    for i, level in enumerate(levels):
        at_level = math.fsum(b - a for a, b, v in pieces if v == level)
        if above + at_level >= nu - eps:
            break
        above += at_level
    need = nu - above
    upper = [(a, b) for a, b, v in pieces if v > level]
    plateau = [(a, b) for a, b, v in pieces if v == level]
    if need <= eps:
        # split falls between this level and the next higher one
        thr = 0.5 * (level + levels[i - 1]) if i > 0 else level
    elif need >= at_level - eps:
        upper += plateau
        thr = 0.5 * (level + levels[i + 1]) if i + 1 < len(levels) else level
    else:
        thr = level
        for a, b in plateau:
            take = min(b - a, need)
            if take > 0:
                upper.append((a, a + take))
                need -= take
    upper = sorted((a, b) for a, b in upper if b > a)
    return ClassASplit(thr, upper, complement(upper, tau))


# --------------------------------------------------------------------------
# projection


def _clip_shift_solve(weights: np.ndarray, values: np.ndarray, lo: float, hi: float, target: float) -> float:
    """Shift ``s`` with ``sum(w * clip(values + s, lo, hi)) == target``.

    The map is continuous, piecewise linear and non-decreasing in ``s``; the
    root is found exactly between consecutive kinks.
    """
    def f(s):
        return float(np.dot(weights, np.clip(values + s, lo, hi)))

    kinks = np.unique(np.concatenate([lo - values, hi - values]))
    fk = np.array([f(s) for s in kinks])
    if target < fk[0] - 1e-15 or target > fk[-1] + 1e-15:
        raise InfeasibleSpecError(f"target {target} outside achievable range [{fk[0]}, {fk[-1]}]")
    j = int(np.searchsorted(fk, target, side="left"))
    if j == 0:
        return float(kinks[0])
    if j >= len(kinks):
        return float(kinks[-1])
    s0, s1, f0, f1 = kinks[j - 1], kinks[j], fk[j - 1], fk[j]
    if f1 == f0:
        return float(s0)
    return float(s0 + (target - f0) * (s1 - s0) / (f1 - f0))


def project_to_constraint(
    raw: PeriodicSignal,
    spec: IsoperimetricSpec,
    flow: Optional[PeriodicSignal] = None,
    target: Optional[float] = None,
    bounds: Optional[tuple[float, float]] = None,
) -> PeriodicSignal:
    """Shift-and-clip ``raw`` so its mean (or flow-weighted mean) hits the target.

    The target defaults to ``spec.c_mean`` or, with ``flow``, to
    ``spec.flux_mean``; bounds default to ``(spec.c_min, spec.c_max)``.
    Signals that already meet the target are returned unchanged.
    """
    lo, hi = bounds if bounds is not None else (spec.c_min, spec.c_max)
    if target is None:
        target = spec.c_mean if flow is None else spec.flux_mean
    current = mean(raw) if flow is None else weighted_mean(raw, flow)
    r_lo, r_hi = raw.bounds
    in_bounds = r_lo >= lo - _bound_tol(lo, hi) and r_hi <= hi + _bound_tol(lo, hi)
    if in_bounds and abs(current - target) <= FIXED_POINT_TOL * max(1.0, abs(target)):
        return raw
    if not is_piecewise(raw):
        raise TypeError("projection needs a piecewise-constant signal")
    tau = raw.period
    if flow is None:
        pieces = raw.pieces()
        weights = np.array([(b - a) / tau for a, b, _ in pieces])
        values = np.array([v for _, _, v in pieces])
        starts = [a for a, _, _ in pieces]
    else:
        if not is_piecewise(flow):
            raise TypeError("flow-weighted projection needs a piecewise-constant flow")
        merged = merged_pieces(raw, flow)
        weights = np.array([(e - s) * vv / tau for s, e, _, vv in merged])
        values = np.array([cv for _, _, cv, _ in merged])
        starts = [s for s, _, _, _ in merged]
        ends = [e for _, e, _, _ in merged]
        pieces = list(zip(starts, ends, values))
    shift = _clip_shift_solve(weights, values, lo, hi, target)
    new_vals = np.clip(values + shift, lo, hi)
    ends = [b for _, b, _ in pieces]
    return from_intervals(tau, list(zip(starts, ends, new_vals)))
