"""Mean outlet molar flux and its reduced forms.

Lower ``J`` means more reactant converted.  Three independent routes:

``analytic``
    Exact sums of the reduced integrand over the pieces of a step signal.
``reduced_quadrature``
    Adaptive quadrature of the same reduced integrand.
``outlet_quadrature``
    Adaptive quadrature of ``C(L, t) v(t)`` built from the characteristic
    solution, with no reduction applied.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .model import ConcentrationField, ExtinctionError, ReactorParams, react
from .signal import (
    PeriodicSignal,
    cumulative,
    is_piecewise,
    mean,
    merged_pieces,
    weighted_mean,
)
from .strategy import IsoperimetricSpec, check_admissible_pair, check_admissible_single

QUAD_EPSREL = 1e-10
RESIDENCE_TOL = 1e-12


class InadmissibleControlWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ReducedIntegrand:
    """``xi -> z(s)`` for ``dz/ds = -k z**n``, ``z(0) = xi`` at a fixed residence ``s``.

    With ``s = L/v`` this is the single-input integrand; with ``s = tau`` the
    two-input one.
    """

    n: float
    k: float
    residence: float

    @classmethod
    def phi(cls, params: ReactorParams) -> "ReducedIntegrand":
        return cls(params.n, params.k, params.L / params.v)

    @classmethod
    def psi(cls, params: ReactorParams, tau: float) -> "ReducedIntegrand":
        return cls(params.n, params.k, tau)

    @property
    def _a(self) -> float:
        return self.k * (self.n - 1.0) * self.residence

    def _check(self, xi):
        if np.any(np.asarray(xi) <= 0):
            raise ValueError("reduced integrand needs xi > 0")

    def __call__(self, xi):
        self._check(xi)
        return react(xi, self.n, self.k, self.residence)

    def prime(self, xi):
        self._check(xi)
        xi = np.asarray(xi, dtype=float)
        if self.n == 1:
            out = np.full(xi.shape, math.exp(-self.k * self.residence))
        else:
            base = 1.0 + self._a * xi ** (self.n - 1.0)
            if np.any(base <= 0):
                raise ExtinctionError("reduced integrand undefined below the extinction threshold")
            out = base ** (-self.n / (self.n - 1.0))
        return float(out) if out.ndim == 0 else out

    def second(self, xi):
        self._check(xi)
        xi = np.asarray(xi, dtype=float)
        if self.n == 1:
            out = np.zeros(xi.shape)
        else:
            base = 1.0 + self._a * xi ** (self.n - 1.0)
            if np.any(base <= 0):
                raise ExtinctionError("reduced integrand undefined below the extinction threshold")
            out = (-self._a * self.n * xi ** (self.n - 2.0)
                   * base ** (-(2.0 * self.n - 1.0) / (self.n - 1.0)))
        return float(out) if out.ndim == 0 else out


def phi(params: ReactorParams, xi):
    return ReducedIntegrand.phi(params)(xi)


def phi_prime(params: ReactorParams, xi):
    return ReducedIntegrand.phi(params).prime(xi)


def phi_second(params: ReactorParams, xi):
    return ReducedIntegrand.phi(params).second(xi)


@dataclass
class CostReport:
    J: float
    route: str
    residuals: dict = field(default_factory=dict)
    admissible: Optional[bool] = None
    improvement_vs: list = field(default_factory=list)

    def improvement_over(self, other: "CostReport") -> float:
        """Percent by which this cost undercuts ``other``: ``100 (1 - J/J_other)``."""
        return 100.0 * (1.0 - self.J / other.J)


def _flag(admissible: Optional[bool], what: str):
    if admissible is False:
        warnings.warn(f"{what} violates the isoperimetric constraints; cost is still evaluated",
                      InadmissibleControlWarning, stacklevel=3)


def _quad_pieces(fn, cuts, period) -> float:
    pts = sorted({0.0, period, *[float(c) % period for c in cuts]})
    total = []
    for a, b in zip(pts, pts[1:]):
        if b - a <= 0:
            continue
        val, _ = quad(fn, a, b, epsabs=0.0, epsrel=QUAD_EPSREL, limit=200)
        total.append(val)
    return math.fsum(total)


def cost_single(
    c: PeriodicSignal,
    params: ReactorParams,
    spec: Optional[IsoperimetricSpec] = None,
    route: str = "auto",
) -> CostReport:
    """Cost of a single-input control at the nominal flow-rate ``params.v``.

    ``route`` is ``auto`` (exact where possible), ``analytic`` or
    ``reduced_quadrature``.
    """
    residuals, admissible = {}, None
    if spec is not None:
        res = check_admissible_single(c, spec)
        residuals, admissible = res.as_dict(), res.admissible
        _flag(admissible, "control")
    tau = c.period
    integrand = ReducedIntegrand.phi(params)
    if route == "auto":
        route = "analytic" if (is_piecewise(c) or params.n == 1) else "reduced_quadrature"
    if route == "analytic":
        if params.n == 1:
            J = params.v * mean(c) * math.exp(-params.k * params.L / params.v)
        elif is_piecewise(c):
            J = params.v * math.fsum((b - a) * integrand(v) for a, b, v in c.pieces()) / tau
        else:
            raise ValueError("analytic route needs a step signal (or n == 1)")
    elif route == "reduced_quadrature":
        J = params.v * _quad_pieces(lambda t: integrand(c(t)), c.breakpoints, tau) / tau
    else:
        raise ValueError(f"unknown route {route!r}")
    return CostReport(J=J, route=route, residuals=residuals, admissible=admissible)


def cost_pair(
    c: PeriodicSignal,
    v: PeriodicSignal,
    params: ReactorParams,
    spec: Optional[IsoperimetricSpec] = None,
    route: str = "auto",
) -> CostReport:
    """Cost with a controlled flow-rate.

    The reduced form ``(1/tau) int Psi(c) v`` needs ``int_0^tau v = L``;
    when that fails the outlet quadrature is used instead.
    """
    tau = c.period
    residuals, admissible = {}, None
    if spec is not None:
        res = check_admissible_pair(c, v, spec, params.L)
        residuals, admissible = res.as_dict(), res.admissible
        _flag(admissible, "control pair")
    residence_ok = abs(mean(v) * tau - params.L) <= RESIDENCE_TOL * params.L
    if route == "auto":
        if not residence_ok:
            route = "outlet_quadrature"
        elif params.n == 1 or (is_piecewise(c) and is_piecewise(v)):
            route = "analytic"
        else:
            route = "reduced_quadrature"
    if route in ("analytic", "reduced_quadrature") and not residence_ok:
        raise ValueError("reduced cost needs int_0^tau v = L")
    integrand = ReducedIntegrand.psi(params, tau)
    if route == "analytic":
        if params.n == 1:
            J = weighted_mean(c, v) * math.exp(-params.k * tau)
        elif is_piecewise(c) and is_piecewise(v):
            J = math.fsum((e - s) * integrand(cv) * vv for s, e, cv, vv in merged_pieces(c, v)) / tau
        else:
            raise ValueError("analytic route needs step signals (or n == 1)")
    elif route == "reduced_quadrature":
        cuts = list(c.breakpoints) + list(v.breakpoints)
        J = _quad_pieces(lambda t: integrand(c(t)) * v(t), cuts, tau) / tau
    elif route == "outlet_quadrature":
        return _with(cost_outlet(c, params, v), residuals, admissible)
    else:
        raise ValueError(f"unknown route {route!r}")
    return CostReport(J=J, route=route, residuals=residuals, admissible=admissible)


def _with(report: CostReport, residuals, admissible) -> CostReport:
    report.residuals = residuals
    report.admissible = admissible
    return report


def outlet_discontinuities(c: PeriodicSignal, params: ReactorParams, v: Optional[PeriodicSignal] = None) -> list[float]:
    """Times in ``[0, tau)`` where ``C(L, t) v(t)`` may jump."""
    tau = c.period
    if v is None:
        return [(b + params.L / params.v) % tau for b in c.breakpoints]
    cf = cumulative(v)
    arrivals = [float(cf.inverse(cf(b) + params.L)) % tau for b in c.breakpoints]
    return arrivals + list(v.breakpoints)


def cost_outlet(c: PeriodicSignal, params: ReactorParams, v: Optional[PeriodicSignal] = None) -> CostReport:
    """``(1/tau) int_0^tau C(L, t) v(t) dt`` straight from the characteristic solution."""
    field_ = ConcentrationField(params, c, v)
    tau = c.period
    if v is None:
        fn = lambda t: field_.outlet(t) * params.v
    else:
        fn = lambda t: field_.outlet(t) * v(t)
    J = _quad_pieces(fn, outlet_discontinuities(c, params, v), tau) / tau
    return CostReport(J=J, route="outlet_quadrature")


def convexity_regime(params: ReactorParams, spec: IsoperimetricSpec) -> str:
    if params.n == 1:
        return "neutral_n1"
    if params.n > 1:
        return "concave_bang_optimal"
    if params.satisfies_convexity(spec.c_min):
        return "convex_steady_optimal"
    return "unclassified"
