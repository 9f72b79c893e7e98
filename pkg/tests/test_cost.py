import math
import warnings
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfr.cost import (
    InadmissibleControlWarning,
    ReducedIntegrand,
    convexity_regime,
    cost_outlet,
    cost_pair,
    cost_single,
    outlet_discontinuities,
    phi,
    phi_prime,
    phi_second,
)
from pfr.model import ConcentrationField, ExtinctionError, ReactorParams, react
from pfr.signal import PiecewiseConstant, Sinusoid, Steady
from pfr.strategy import IsoperimetricSpec, make_bang_pair, make_bang_single


def sinusoid_closed_form(p, m, A):
    """Mean of v/(1/c + a) over a sine period, a = kL/v, for n = 2."""
    a = p.k * p.L / p.v
    return (p.v / a) * (1.0 - 1.0 / math.sqrt((1.0 + a * m) ** 2 - (a * A) ** 2))


def monte_carlo_cost(c, p, v=None, n=400_000, seed=7):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, c.period, n)
    f = ConcentrationField(p, c, v)
    vt = p.v if v is None else v(t)
    sample = f.outlet(t) * vt
    return float(sample.mean()), float(sample.std() / math.sqrt(n))


class TestReducedIntegrand:
    @pytest.mark.parametrize("n", [0.5, 1.0, 2.0, 3.0])
    def test_value_is_reacted_inlet(self, params, n):
        p = ReactorParams(n, params.k, params.L, params.v)
        for xi in (0.5, 1.0, 1.5):
            assert phi(p, xi) == react(xi, n, p.k, 100.0)

    @pytest.mark.parametrize("n", [0.5, 1.0, 2.0, 3.0])
    def test_derivatives_match_finite_differences(self, params, n):
        p = ReactorParams(n, params.k, params.L, params.v)
        h = 1e-5
        for xi in (0.5, 0.9, 1.4):
            fd1 = (phi(p, xi + h) - phi(p, xi - h)) / (2 * h)
            fd2 = (phi_prime(p, xi + h) - phi_prime(p, xi - h)) / (2 * h)
            assert phi_prime(p, xi) == pytest.approx(fd1, rel=1e-7)
            assert phi_second(p, xi) == pytest.approx(fd2, rel=1e-5, abs=1e-12)

    def test_curvature_sign(self, params):
        assert phi_second(params, 1.0) < 0
        assert phi_second(ReactorParams(0.5, 0.001, 1.0, 0.01), 1.0) > 0
        assert phi_second(ReactorParams(1.0, 0.001, 1.0, 0.01), 1.0) == 0

    def test_psi_residence(self):
        g = ReducedIntegrand.psi(ReactorParams(2.0, 0.001, 1.0, 0.01), 50.0)
        assert g(1.0) == pytest.approx(1 / 1.05)

    def test_domain(self, params):
        with pytest.raises(ValueError):
            phi(params, 0.0)
        with pytest.raises(ExtinctionError):
            ReducedIntegrand(0.5, 1.0, 100.0).prime(1e-6)


class TestCostSingle:
    def test_steady_exact(self, params):
        assert cost_single(Steady(100.0, 1.0), params).J == pytest.approx(float(F(1, 110)), rel=1e-15)

    def test_bang_exact(self, params):
        c = PiecewiseConstant(100.0, (0.0, 50.0), (1.5, 0.5))
        exact = F(1, 100) * (F(1, 2) * F(3, 2) / F(23, 20) + F(1, 2) * F(1, 2) / F(21, 20))
        assert cost_single(c, params).J == pytest.approx(float(exact), rel=1e-15)

    def test_sinusoid_closed_form(self, params):
        rep = cost_single(Sinusoid(100.0, 1.0, 0.5), params)
        assert rep.route == "reduced_quadrature"
        assert rep.J == pytest.approx(sinusoid_closed_form(params, 1.0, 0.5), rel=1e-12)

    def test_routes_agree(self, params):
        c = PiecewiseConstant(100.0, (0.0, 17.0, 64.0), (0.7, 1.4, 1.0))
        a = cost_single(c, params, route="analytic").J
        b = cost_single(c, params, route="reduced_quadrature").J
        o = cost_outlet(c, params).J
        assert b == pytest.approx(a, rel=1e-12)
        assert o == pytest.approx(a, rel=1e-12)

    def test_monte_carlo(self, params):
        c = PiecewiseConstant(100.0, (0.0, 17.0, 64.0), (0.7, 1.4, 1.0))
        est, se = monte_carlo_cost(c, params)
        assert abs(est - cost_single(c, params).J) < 4 * se

    def test_n1_route(self):
        p = ReactorParams(1.0, 0.001, 1.0, 0.01)
        c = PiecewiseConstant(100.0, (0.0, 30.0), (0.6, 1.1714285714285714))
        J = cost_single(c, p).J
        assert J == pytest.approx(0.01 * 1.0 * math.exp(-0.1), rel=1e-12)
        assert cost_outlet(c, p).J == pytest.approx(J, rel=1e-12)

    def test_unknown_route(self, params):
        with pytest.raises(ValueError):
            cost_single(Steady(100.0, 1.0), params, route="nope")
        with pytest.raises(ValueError):
            cost_single(Sinusoid(100.0, 1.0, 0.5), params, route="analytic")

    def test_inadmissible_warns(self, params, spec_single):
        with pytest.warns(InadmissibleControlWarning):
            rep = cost_single(Steady(100.0, 1.2), params, spec_single)
        assert rep.admissible is False
        assert rep.residuals["mean"] == pytest.approx(0.2)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0.3, 2.0), min_size=1, max_size=6), st.floats(5.0, 30.0))
    def test_three_routes_property(self, vals, width):
        bps = tuple(i * width for i in range(len(vals)) if i * width < 100.0)
        c = PiecewiseConstant(100.0, bps, tuple(vals[: len(bps)]))
        p = ReactorParams(2.0, 0.001, 1.0, 0.013)
        a = cost_single(c, p, route="analytic").J
        assert cost_single(c, p, route="reduced_quadrature").J == pytest.approx(a, rel=1e-10)
        assert cost_outlet(c, p).J == pytest.approx(a, rel=1e-9)


class TestCostPair:
    def test_schedule_exact(self, params):
        c = PiecewiseConstant(100.0, (0.0, 50.0), (1.5, 0.5))
        v = PiecewiseConstant(100.0, (0.0, 50.0), (0.005, 0.015))
        exact = F(1, 100) * 50 * (F(3, 2) / F(23, 20) * F(1, 200) + F(1, 2) / F(21, 20) * F(3, 200))
        rep = cost_pair(c, v, params)
        assert rep.route == "analytic"
        assert rep.J == pytest.approx(float(exact), rel=1e-15)
        assert cost_outlet(c, params, v).J == pytest.approx(float(exact), rel=1e-12)

    def test_bang_pair_outlet_oracle(self, params, spec):
        pair = make_bang_pair(spec, params.L)
        J = cost_pair(pair.c, pair.v, params, spec).J
        assert cost_outlet(pair.c, params, pair.v).J == pytest.approx(J, rel=1e-12)
        est, se = monte_carlo_cost(pair.c, params, pair.v)
        assert abs(est - J) < 4 * se

    def test_smooth_pair_routes(self, params):
        c = Sinusoid(100.0, 1.0, 0.4, 0.3)
        v = Sinusoid(100.0, 0.01, 0.003, 2.0)
        q = cost_pair(c, v, params)
        assert q.route == "reduced_quadrature"
        assert cost_outlet(c, params, v).J == pytest.approx(q.J, rel=1e-9)

    def test_residence_mismatch_falls_back(self, params):
        c = PiecewiseConstant(100.0, (0.0, 50.0), (1.5, 0.5))
        v = Steady(100.0, 0.02)
        rep = cost_pair(c, v, params)
        assert rep.route == "outlet_quadrature"
        # constant flow: same as single-input evaluation at v = 0.02
        p2 = ReactorParams(2.0, 0.001, 1.0, 0.02)
        assert rep.J == pytest.approx(cost_single(c, p2).J, rel=1e-10)
        with pytest.raises(ValueError):
            cost_pair(c, v, params, route="analytic")

    def test_n1(self, spec):
        p = ReactorParams(1.0, 0.001, 1.0, 0.01)
        pair = make_bang_pair(spec, 1.0)
        J = cost_pair(pair.c, pair.v, p).J
        assert J == pytest.approx(spec.flux_mean * math.exp(-0.1), rel=1e-12)
        assert cost_outlet(pair.c, p, pair.v).J == pytest.approx(J, rel=1e-10)


def test_discontinuities(params):
    c = PiecewiseConstant(100.0, (0.0, 30.0), (1.5, 0.5))
    assert sorted(outlet_discontinuities(c, params)) == pytest.approx([0.0, 30.0])


def test_improvement_over(params):
    a = cost_single(make_bang_single(IsoperimetricSpec(100.0, 1.0, 0.5, 1.5)), params)
    b = cost_single(Steady(100.0, 1.0), params)
    assert a.improvement_over(b) == pytest.approx(100 * (1 - a.J / b.J))


@pytest.mark.parametrize("n, c_min, expected", [
    (1.0, 0.5, "neutral_n1"),
    (2.0, 0.5, "concave_bang_optimal"),
    (0.5, 0.5, "convex_steady_optimal"),
    (0.5, 0.001, "unclassified"),
])
def test_convexity_regime(n, c_min, expected):
    p = ReactorParams(n, 0.001, 1.0, 0.01)
    s = IsoperimetricSpec(100.0, 1.0, c_min, 1.5)
    assert convexity_regime(p, s) == expected


def test_phi_case_study_values(params):
    assert phi(params, 1.0) == pytest.approx(10 / 11, rel=1e-15)
    h = 1e-6
    fd = (phi(params, 1.2 + h) - phi(params, 1.2 - h)) / (2 * h)
    assert abs(phi_prime(params, 1.2) - fd) < 1e-8


def test_zero_kinetics_limits():
    assert ReducedIntegrand(2.0, 0.0, 100.0)(1.37) == pytest.approx(1.37)
    # vanishing kinetics: outlet flux equals the fed flux
    p = ReactorParams(2.0, 1e-300, 1.0, 0.01)
    assert cost_outlet(Steady(100.0, 1.0), p).J == pytest.approx(0.01, rel=1e-15)
