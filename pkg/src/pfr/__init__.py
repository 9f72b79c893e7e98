"""Periodic bang-bang control of an isothermal plug-flow reactor.

Exact characteristic solutions, constructive bang-bang strategies under
mean-value constraints, cost evaluation along independent routes and a
finite-difference cross-check.
"""

from .cost import CostReport, cost_outlet, cost_pair, cost_single, convexity_regime
from .model import ConcentrationField, ExtinctionError, ReactorParams
from .signal import CumulativeFlow, PiecewiseConstant, Sinusoid, Steady, cumulative, mean, weighted_mean
from .strategy import (
    InfeasibleSpecError,
    IsoperimetricSpec,
    kappa,
    make_bang_pair,
    make_bang_single,
    pair_measures,
    project_to_constraint,
)

__version__ = "0.1.0"

__all__ = [
    "ConcentrationField",
    "CostReport",
    "CumulativeFlow",
    "ExtinctionError",
    "InfeasibleSpecError",
    "IsoperimetricSpec",
    "PiecewiseConstant",
    "ReactorParams",
    "Sinusoid",
    "Steady",
    "convexity_regime",
    "cost_outlet",
    "cost_pair",
    "cost_single",
    "cumulative",
    "kappa",
    "make_bang_pair",
    "make_bang_single",
    "mean",
    "pair_measures",
    "project_to_constraint",
    "weighted_mean",
]
