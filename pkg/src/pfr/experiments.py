"""Case-study reproduction, amplitude sweeps and randomized optimality trials."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .cost import CostReport, InadmissibleControlWarning, convexity_regime, cost_pair, cost_single
from .model import ReactorParams
from .signal import PeriodicSignal, PiecewiseConstant, Sinusoid, Steady, weighted_mean
from .strategy import (
    IsoperimetricSpec,
    make_bang_pair,
    make_bang_single,
    project_to_constraint,
)

# J of the optimal control may exceed a sampled J by at most this much
OPTIMALITY_SLACK = 1e-12

# Published case-study figures, rounded as quoted (J in mol s^-1 m^-2).
QUOTED_COSTS = {
    "steady": 9.0909e-3,
    "sinusoid": 8.9968e-3,
    "bang": 8.9027e-3,
    "two_input_schedule": 6.8323e-3,
}
QUOTED_PERCENTAGES = {
    ("bang", "sinusoid"): 1.05,
    ("bang", "steady"): 2.07,
    ("two_input_schedule", "bang"): 23.26,
    ("two_input_schedule", "steady"): 24.84,
}
QUOTED_MAX_SINGLE_IMPROVEMENT = 8.26


def case_study_params(n: float = 2.0) -> ReactorParams:
    return ReactorParams(n=n, k=0.001, L=1.0, v=0.01)


def case_study_spec(two_input: bool = True) -> IsoperimetricSpec:
    if two_input:
        return IsoperimetricSpec(tau=100.0, c_mean=1.0, c_min=0.5, c_max=1.5,
                                 v_mean=0.01, v_min=0.005, v_max=0.015)
    return IsoperimetricSpec(tau=100.0, c_mean=1.0, c_min=0.5, c_max=1.5)


def case_study_signals(spec: Optional[IsoperimetricSpec] = None) -> dict:
    """Controls of the published comparison.

    ``bang`` is high first (``c_max`` on the first half period); the flow
    schedule runs low first, so minimum concentration meets maximum flow.
    """
    spec = spec or case_study_spec()
    tau, half = spec.tau, spec.tau / 2
    amp = spec.c_mean - spec.c_min
    out = {
        "steady": Steady(tau, spec.c_mean),
        "sinusoid": Sinusoid(tau, spec.c_mean, amp),
        "bang": PiecewiseConstant(tau, (0.0, half), (spec.c_max, spec.c_min)),
    }
    if spec.two_input:
        out["flow_schedule"] = PiecewiseConstant(tau, (0.0, half), (spec.v_min, spec.v_max))
        out["flow_steady"] = Steady(tau, spec.v_mean)
    return out


@dataclass
class CaseStudyRow:
    label: str
    report: CostReport

    @property
    def J(self) -> float:
        return self.report.J


@dataclass
class CaseStudyTable:
    rows: list
    percentages: dict
    deviations: list

    def J(self, label: str) -> float:
        return next(r.J for r in self.rows if r.label == label)


def improvement(J_a: float, J_b: float) -> float:
    """Percent by which ``J_a`` undercuts ``J_b``."""
    return 100.0 * (1.0 - J_a / J_b)


def case_study_table(params: Optional[ReactorParams] = None,
                     spec: Optional[IsoperimetricSpec] = None) -> CaseStudyTable:
    params = params or case_study_params()
    spec = spec or case_study_spec()
    single = IsoperimetricSpec(spec.tau, spec.c_mean, spec.c_min, spec.c_max)
    sig = case_study_signals(spec)
    rows = [
        CaseStudyRow("steady", cost_single(sig["steady"], params, single)),
        CaseStudyRow("sinusoid", cost_single(sig["sinusoid"], params, single)),
        CaseStudyRow("bang", cost_single(sig["bang"], params, single)),
    ]
    if spec.two_input:
        with warnings.catch_warnings():
            # the published two-input schedule misses the flux constraint; it is
            # evaluated anyway and its residual reported below
            warnings.simplefilter("ignore", InadmissibleControlWarning)
            sched = cost_pair(sig["bang"], sig["flow_schedule"], params, spec)
        rows.append(CaseStudyRow("two_input_schedule", sched))
        pair = make_bang_pair(spec, params.L)
        rows.append(CaseStudyRow("bang_pair", cost_pair(pair.c, pair.v, params, spec)))

    J = {r.label: r.J for r in rows}
    percentages = {}
    for a in J:
        for b in J:
            if a != b:
                percentages[(a, b)] = improvement(J[a], J[b])
    for r in rows:
        r.report.improvement_vs = [(b, percentages[(r.label, b)]) for b in J if b != r.label]
    return CaseStudyTable(rows=rows, percentages=percentages, deviations=documented_deviations(spec, params))


def documented_deviations(spec: Optional[IsoperimetricSpec] = None,
                          params: Optional[ReactorParams] = None) -> list:
    """Known mismatches between quoted case-study statements and computation.

    Reported alongside results; they are findings, not failures.
    """
    spec = spec or case_study_spec()
    out = []
    if spec.two_input:
        sig = case_study_signals(spec)
        flux = weighted_mean(sig["bang"], sig["flow_schedule"])
        out.append({
            "id": "two_input_schedule_flux_residual",
            "description": "equal half-period two-input schedule misses the mean-flux constraint",
            "computed": flux - spec.flux_mean,
            "expected": 0.0,
        })
    out.append({
        "id": "single_input_max_improvement",
        "description": "improvement at alpha=1 from the closed-form percentage function",
        "computed": percent_single(1.0),
        "quoted": QUOTED_MAX_SINGLE_IMPROVEMENT,
    })
    return out


# --------------------------------------------------------------------------
# amplitude sweeps (closed forms are specific to the case-study parameters)


def cost_single_closed_form(alpha):
    alpha = np.asarray(alpha, dtype=float)
    return (alpha ** 2 - 11.0) / (10.0 * alpha ** 2 - 1210.0)


def percent_single(alpha):
    alpha = np.asarray(alpha, dtype=float)
    out = 1000.0 * alpha ** 2 / (121.0 - alpha ** 2)
    return float(out) if out.ndim == 0 else out


def cost_pair_closed_form(alpha, beta):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    return (alpha ** 2 + 10.0 * alpha * beta - 11.0) / (10.0 * alpha ** 2 - 1210.0)


def percent_pair(alpha, beta):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    out = 1000.0 * alpha * (alpha + 11.0 * beta) / (121.0 - alpha ** 2)
    return float(out) if out.ndim == 0 else out


def default_amplitude_grid(points: int) -> np.ndarray:
    """``points`` equally spaced amplitudes strictly inside (0, 1)."""
    return np.linspace(0.0, 1.0, points + 2)[1:-1]


def _check_amplitudes(values: Iterable[float], name: str):
    for a in values:
        if not 0.0 < a < 1.0:
            raise ValueError(f"{name}={a} outside (0, 1); the model does not cover vanishing inlet or flow")


@dataclass(frozen=True)
class AmplitudePoint:
    alpha: float
    beta: Optional[float]
    J: float
    P: float
    J_closed: float
    P_closed: float


def symmetric_bang(tau: float, center: float, amplitude: float, high_first: bool = True) -> PiecewiseConstant:
    hi, lo = center * (1 + amplitude), center * (1 - amplitude)
    vals = (hi, lo) if high_first else (lo, hi)
    return PiecewiseConstant(tau, (0.0, tau / 2), vals)


def _threads() -> int:
    env = os.environ.get("PFR_THREADS")
    return max(1, int(env)) if env else 1


def _map(fn: Callable, items: Sequence, threads: Optional[int] = None) -> list:
    threads = threads or _threads()
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def amplitude_sweep_single(alphas: Sequence[float], params: Optional[ReactorParams] = None,
                           spec: Optional[IsoperimetricSpec] = None,
                           threads: Optional[int] = None) -> list:
    params = params or case_study_params()
    spec = spec or case_study_spec(two_input=False)
    _check_amplitudes(alphas, "alpha")
    J_steady = cost_single(Steady(spec.tau, spec.c_mean), params).J

    def point(alpha):
        J = cost_single(symmetric_bang(spec.tau, spec.c_mean, alpha), params).J
        return AmplitudePoint(float(alpha), None, J, improvement(J, J_steady),
                              float(cost_single_closed_form(alpha)), percent_single(alpha))

    return _map(point, list(alphas), threads)


def amplitude_sweep_pair(alphas: Sequence[float], betas: Sequence[float],
                         params: Optional[ReactorParams] = None,
                         spec: Optional[IsoperimetricSpec] = None,
                         threads: Optional[int] = None) -> list:
    """Grid of points (row-major in alpha) using the equal half-period schedule."""
    params = params or case_study_params()
    spec = spec or case_study_spec()
    _check_amplitudes(alphas, "alpha")
    _check_amplitudes(betas, "beta")
    J_steady = cost_pair(Steady(spec.tau, spec.c_mean), Steady(spec.tau, spec.v_mean), params).J

    def point(ab):
        alpha, beta = ab
        c = symmetric_bang(spec.tau, spec.c_mean, alpha, high_first=True)
        v = symmetric_bang(spec.tau, spec.v_mean, beta, high_first=False)
        J = cost_pair(c, v, params).J
        return AmplitudePoint(float(alpha), float(beta), J, improvement(J, J_steady),
                              float(cost_pair_closed_form(alpha, beta)), percent_pair(alpha, beta))

    return _map(point, [(a, b) for a in alphas for b in betas], threads)


# --------------------------------------------------------------------------
# randomized optimality trials


def random_piecewise(rng: np.random.Generator, period: float, pieces: int,
                     lo: float, hi: float) -> PiecewiseConstant:
    """Step signal with ``pieces`` uniform random levels on random breakpoints."""
    cuts = np.sort(rng.uniform(0.0, period, size=pieces - 1))
    bps = np.concatenate([[0.0], cuts])
    vals = rng.uniform(lo, hi, size=pieces)
    keep = np.concatenate([[True], np.diff(bps) > 0])
    return PiecewiseConstant(period, tuple(bps[keep]), tuple(vals[keep]))


def random_admissible_single(rng, spec: IsoperimetricSpec, pieces: int) -> PeriodicSignal:
    raw = random_piecewise(rng, spec.tau, pieces, spec.c_min, spec.c_max)
    return project_to_constraint(raw, spec)


def random_admissible_pair(rng, spec: IsoperimetricSpec, L: float, pieces: int):
    raw_v = random_piecewise(rng, spec.tau, pieces, spec.v_min, spec.v_max)
    v = project_to_constraint(raw_v, spec, target=L / spec.tau, bounds=(spec.v_min, spec.v_max))
    raw_c = random_piecewise(rng, spec.tau, pieces, spec.c_min, spec.c_max)
    c = project_to_constraint(raw_c, spec, flow=v)
    return c, v


@dataclass
class TrialReport:
    reference: str
    J_reference: float
    samples: np.ndarray
    violations: int
    regime: str
    two_input: bool
    seed: int
    gaps: np.ndarray = field(repr=False, default=None)

    @property
    def J_min_sample(self) -> float:
        return float(np.min(self.samples))

    @property
    def min_gap(self) -> float:
        return float(np.min(self.gaps))

    @property
    def max_spread(self) -> float:
        return float(np.max(np.abs(self.samples - self.J_reference)))


DEFAULT_SEED = 20240117


def optimality_trial(spec: IsoperimetricSpec, params: ReactorParams, samples: int = 200,
                     pieces: int = 8, seed: int = DEFAULT_SEED, two_input: bool = False,
                     threads: Optional[int] = None) -> TrialReport:
    """Compare the constructive optimum with projected random admissible controls.

    The reference is the bang-bang control (n >= 1) or the steady control
    (n < 1 in the convex regime).  A violation is a sample beating the
    reference by more than ``OPTIMALITY_SLACK``.  Samples are drawn
    sequentially from ``numpy.random.default_rng(seed)`` (PCG64), so the
    stream is reproducible regardless of ``threads``.
    """
    rng = np.random.default_rng(seed)
    regime = convexity_regime(params, spec)
    if two_input:
        draws = [random_admissible_pair(rng, spec, params.L, pieces) for _ in range(samples)]
        pair = make_bang_pair(spec, params.L)
        if regime == "convex_steady_optimal":
            reference = "steady"
            J_ref = cost_pair(Steady(spec.tau, spec.flux_mean * spec.tau / params.L),
                              Steady(spec.tau, params.L / spec.tau), params).J
        else:
            reference = "bang_pair"
            J_ref = cost_pair(pair.c, pair.v, params, spec).J
        costs = _map(lambda cv: cost_pair(cv[0], cv[1], params, spec).J, draws, threads)
    else:
        draws = [random_admissible_single(rng, spec, pieces) for _ in range(samples)]
        if regime == "convex_steady_optimal":
            reference = "steady"
            J_ref = cost_single(Steady(spec.tau, spec.c_mean), params, spec).J
        else:
            reference = "bang"
            J_ref = cost_single(make_bang_single(spec), params, spec).J
        costs = _map(lambda c: cost_single(c, params, spec).J, draws, threads)
    costs = np.asarray(costs)
    gaps = costs - J_ref
    violations = int(np.sum(J_ref > costs + OPTIMALITY_SLACK))
    return TrialReport(reference, J_ref, costs, violations, regime, two_input, seed, gaps)


def switching_invariance(spec: IsoperimetricSpec, params: ReactorParams,
                         switchings: Sequence[int] = (1, 2, 5, 10), two_input: bool = False) -> dict:
    """Cost of bang-bang realizations with more switchings and identical measures."""
    out = {}
    for m in switchings:
        if two_input:
            pair = make_bang_pair(spec, params.L, switchings=m)
            out[m] = cost_pair(pair.c, pair.v, params, spec).J
        else:
            out[m] = cost_single(make_bang_single(spec, switchings=m), params, spec).J
    return out
