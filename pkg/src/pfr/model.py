"""Exact concentration field of the isothermal plug-flow reactor.

The reactant balance

    dC/dt + v(t) dC/dx = -k C**n,    C(0, t) = C0(t)

is solved along characteristics.  A fluid element entering at time ``r``
reaches position ``x`` after a residence ``s = t - r`` where
``V(t) - V(r) = x``; along the way it follows ``dz/ds = -k z**n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .signal import ArrayLike, CumulativeFlow, PeriodicSignal, cumulative


class ExtinctionError(ValueError):
    """Reactant is exhausted inside the tube (only possible for n < 1)."""


@dataclass(frozen=True)
class ReactorParams:
    n: float
    k: float
    L: float
    v: float

    def __post_init__(self):
        for name in ("n", "k", "L", "v"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"ReactorParams.{name} must be finite and > 0, got {val}")

    @property
    def residence_time(self) -> float:
        return self.L / self.v

    def extinction_threshold(self) -> Optional[float]:
        """Smallest inlet concentration that survives the whole tube when n < 1.

        Equals ``(v / (k L (1 - n)))**(-1/(1 - n))``; above it the reduced
        integrand is convex.  ``None`` for n >= 1, where no threshold exists.
        """
        if self.n >= 1:
            return None
        m = 1.0 - self.n
        return (self.v / (self.k * self.L * m)) ** (-1.0 / m)

    def satisfies_convexity(self, c_min: float) -> bool:
        thr = self.extinction_threshold()
        return thr is not None and c_min > thr


def react(z0: ArrayLike, n: float, k: float, s: ArrayLike):
    """Solution of ``dz/ds = -k z**n`` with ``z(0) = z0`` after time ``s``."""
    z0 = np.asarray(z0, dtype=float)
    s = np.asarray(s, dtype=float)
    if n == 1:
        out = z0 * np.exp(-k * s)
    else:
        base = z0 ** (1.0 - n) + k * (n - 1.0) * s
        if n < 1 and np.any(base <= 0):
            raise ExtinctionError(
                f"reactant exhausted along a characteristic (n={n}); "
                "inlet concentration is below the extinction threshold"
            )
        out = base ** (-1.0 / (n - 1.0))
    if out.ndim == 0:
        return float(out)
    return out


def _check_x(x: ArrayLike, L: float):
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > L):
        raise ValueError(f"x must lie in [0, {L}]")


def _check_positive_inlet(inlet: PeriodicSignal):
    lo, _ = inlet.bounds
    if not lo > 0:
        raise ValueError(f"inlet concentration must be strictly positive, minimum is {lo}")


def eval_constant_flow(params: ReactorParams, inlet: PeriodicSignal, x: ArrayLike, t: ArrayLike):
    _check_x(x, params.L)
    _check_positive_inlet(inlet)
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    s = x / params.v
    return react(inlet(t - s), params.n, params.k, s)


def characteristic_foot(cf: CumulativeFlow, x: ArrayLike, t: ArrayLike):
    """Entry time ``r = V^-1(V(t) - x)`` and residence ``s = t - r``."""
    t = np.asarray(t, dtype=float)
    r = cf.inverse(cf(t) - np.asarray(x, dtype=float))
    return r, t - r


def eval_controlled_flow(
    params: ReactorParams,
    inlet: PeriodicSignal,
    flow: Union[PeriodicSignal, CumulativeFlow],
    x: ArrayLike,
    t: ArrayLike,
):
    _check_x(x, params.L)
    _check_positive_inlet(inlet)
    cf = flow if isinstance(flow, CumulativeFlow) else cumulative(flow)
    r, s = characteristic_foot(cf, x, t)
    return react(inlet(r), params.n, params.k, s)


@dataclass(frozen=True)
class ConcentrationField:
    """``C(x, t)`` for a given inlet and, optionally, a time-varying flow-rate."""

    params: ReactorParams
    inlet: PeriodicSignal
    flow: Optional[PeriodicSignal] = None

    def __post_init__(self):
        _check_positive_inlet(self.inlet)
        if self.flow is not None:
            object.__setattr__(self, "_cf", cumulative(self.flow))

    def velocity(self, t: ArrayLike):
        if self.flow is None:
            return np.full(np.shape(t), self.params.v) if np.ndim(t) else self.params.v
        return self.flow(t)

    def __call__(self, x: ArrayLike, t: ArrayLike):
        if self.flow is None:
            return eval_constant_flow(self.params, self.inlet, x, t)
        return eval_controlled_flow(self.params, self.inlet, self._cf, x, t)

    def outlet(self, t: ArrayLike):
        return self(self.params.L, t)
