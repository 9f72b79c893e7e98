import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from pfr.model import (
    ConcentrationField,
    ExtinctionError,
    ReactorParams,
    characteristic_foot,
    eval_constant_flow,
    eval_controlled_flow,
    react,
)
from pfr.signal import PiecewiseConstant, Sinusoid, Steady, cumulative


def ode_along(z0, n, k, s):
    sol = solve_ivp(lambda _, z: -k * np.maximum(z, 0.0) ** n, (0.0, s), [z0], rtol=1e-12, atol=1e-14)
    return float(sol.y[0, -1])


class TestReactorParams:
    @pytest.mark.parametrize("field", ["n", "k", "L", "v"])
    def test_rejects_nonpositive(self, field):
        kw = dict(n=2.0, k=0.001, L=1.0, v=0.01)
        kw[field] = 0.0
        with pytest.raises(ValueError):
            ReactorParams(**kw)

    def test_residence_time(self, params):
        assert params.residence_time == pytest.approx(100.0)

    def test_threshold(self):
        p = ReactorParams(0.5, 0.001, 1.0, 0.01)
        # (v/(kL(1-n)))^(-1/(1-n)) = 20^-2
        assert p.extinction_threshold() == pytest.approx(0.0025)
        assert p.satisfies_convexity(0.5)
        assert not p.satisfies_convexity(0.001)
        assert ReactorParams(2.0, 0.001, 1.0, 0.01).extinction_threshold() is None


class TestReact:
    @pytest.mark.parametrize("n", [0.5, 1.0, 1.5, 2.0, 3.0])
    @pytest.mark.parametrize("z0", [0.5, 1.0, 1.5])
    def test_matches_ode(self, n, z0):
        assert react(z0, n, 0.001, 100.0) == pytest.approx(ode_along(z0, n, 0.001, 100.0), rel=1e-9)

    def test_second_order_closed_form(self):
        assert react(1.0, 2.0, 0.001, 100.0) == pytest.approx(1.0 / 1.1)

    def test_extinction(self):
        with pytest.raises(ExtinctionError):
            react(1e-6, 0.5, 1.0, 100.0)

    def test_vectorized(self):
        out = react(np.array([0.5, 1.5]), 2.0, 0.001, 100.0)
        np.testing.assert_allclose(out, [0.5 / 1.05, 1.5 / 1.15])


class TestConstantFlow:
    def test_steady_profile(self, params):
        x = np.linspace(0, 1, 11)
        got = eval_constant_flow(params, Steady(100.0, 1.0), x, 0.0)
        np.testing.assert_allclose(got, 1.0 / (1.0 + 0.001 * x / 0.01))

    def test_delay(self, params):
        c = PiecewiseConstant(100.0, (0.0, 50.0), (1.5, 0.5))
        # at the outlet the inlet is seen 100 s late, i.e. one full period
        assert eval_constant_flow(params, c, 1.0, 10.0) == pytest.approx(react(1.5, 2, 0.001, 100.0))
        assert eval_constant_flow(params, c, 0.5, 10.0) == pytest.approx(react(0.5, 2, 0.001, 50.0))

    def test_rejects_x_outside(self, params):
        with pytest.raises(ValueError):
            eval_constant_flow(params, Steady(100.0, 1.0), 1.1, 0.0)

    def test_rejects_nonpositive_inlet(self, params):
        with pytest.raises(ValueError):
            ConcentrationField(params, PiecewiseConstant(100.0, (0.0, 50.0), (1.0, 0.0)))

    def test_pde_residual_finite_difference(self, params):
        """Smooth inlet: C_t + v C_x + k C^n vanishes pointwise."""
        f = ConcentrationField(params, Sinusoid(100.0, 1.0, 0.5))
        x, t, h = 0.37, 41.0, 1e-4
        ct = (f(x, t + h) - f(x, t - h)) / (2 * h)
        cx = (f(x + h * 1e-2, t) - f(x - h * 1e-2, t)) / (2 * h * 1e-2)
        res = ct + params.v * cx + params.k * f(x, t) ** params.n
        assert abs(res) < 1e-8


class TestControlledFlow:
    def test_reduces_to_constant_flow(self, params):
        c = Sinusoid(100.0, 1.0, 0.5)
        x = np.linspace(0, 1, 7)[:, None]
        t = np.linspace(0, 300, 13)[None, :]
        a = eval_constant_flow(params, c, x, t)
        b = eval_controlled_flow(params, c, Steady(100.0, params.v), x, t)
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_foot_integrates_flow(self):
        v = PiecewiseConstant(100.0, (0.0, 50.0), (0.015, 0.005))
        cf = cumulative(v)
        r, s = characteristic_foot(cf, 1.0, 130.0)
        # back from 130: 0.45 on [100, 130), 0.25 on [50, 100), 0.3 on [30, 50)
        assert float(r) == pytest.approx(30.0, abs=1e-12)
        assert float(s) == pytest.approx(100.0, abs=1e-12)
        assert cf(130.0) - cf(float(r)) == pytest.approx(1.0, abs=1e-12)

    def test_characteristic_ode_oracle(self, params):
        """Integrate dx/dt = v(t), dC/dt = -k C^n from the inlet and compare."""
        c = Sinusoid(100.0, 1.0, 0.5, 0.3)
        v = Sinusoid(100.0, 0.01, 0.004, 1.1)
        r0 = 17.0
        sol = solve_ivp(lambda t, y: [v(t), -params.k * y[1] ** params.n], (r0, r0 + 200.0),
                        [0.0, c(r0)], rtol=1e-12, atol=1e-14, dense_output=True,
                        events=lambda t, y: y[0] - params.L)
        t_exit = float(sol.t_events[0][0])
        C_exit = float(sol.y_events[0][0][1])
        f = ConcentrationField(params, c, v)
        assert f.outlet(t_exit) == pytest.approx(C_exit, rel=1e-8)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.0, 1.0), st.floats(0.0, 500.0))
    def test_step_flow_characteristic_property(self, x, t):
        p = ReactorParams(2.0, 0.001, 1.0, 0.01)
        v = PiecewiseConstant(100.0, (0.0, 50.0), (0.015, 0.005))
        c = PiecewiseConstant(100.0, (0.0, 30.0), (0.7, 1.3))
        cf = cumulative(v)
        r, s = characteristic_foot(cf, x, t)
        assert cf(t) - cf(float(r)) == pytest.approx(x, abs=1e-10)
        assert eval_controlled_flow(p, c, v, x, t) == pytest.approx(react(c(float(r)), 2, 0.001, float(s)), rel=1e-12)


def test_field_velocity_and_outlet(params):
    f = ConcentrationField(params, Steady(100.0, 1.0))
    assert f.velocity(3.0) == params.v
    assert f.outlet(5.0) == pytest.approx(1 / 1.1)
    g = ConcentrationField(params, Steady(100.0, 1.0), Steady(100.0, 0.02))
    np.testing.assert_allclose(g.velocity(np.array([1.0, 2.0])), [0.02, 0.02])
    assert g.outlet(5.0) == pytest.approx(1 / 1.05)


def test_pure_transport_limit():
    assert react(1.0, 1.0, 0.0, 123.0) == 1.0
    assert react(1.3, 2.0, 0.0, 123.0) == pytest.approx(1.3)


@pytest.mark.parametrize("t", [25.0, 75.0])
def test_bang_spot_values_against_ode(params, t):
    c = PiecewiseConstant(100.0, (0.0, 50.0), (1.5, 0.5))
    got = ConcentrationField(params, c).outlet(t)
    z0 = c(t - 100.0)
    assert got == pytest.approx(10 * z0 / (10 + z0), rel=1e-12)
    assert got == pytest.approx(ode_along(z0, 2.0, params.k, 100.0), rel=1e-10)


def test_periodic_in_time(params):
    c = PiecewiseConstant(100.0, (0.0, 31.0, 64.0), (0.6, 1.4, 1.0))
    v = PiecewiseConstant(100.0, (0.0, 50.0), (0.015, 0.005))
    f = ConcentrationField(params, c, v)
    x = np.linspace(0, 1, 9)[:, None]
    t = np.linspace(0, 100, 37)[None, :] + 0.123
    np.testing.assert_allclose(f(x, t + 100.0), f(x, t), rtol=1e-12, atol=0)


def test_monotone_decay_along_characteristic(params):
    c = Sinusoid(100.0, 1.0, 0.5)
    v = Sinusoid(100.0, 0.01, 0.004)
    f = ConcentrationField(params, c, v)
    cf = cumulative(v)
    r0 = 12.0
    ts = np.linspace(r0, float(cf.inverse(cf(r0) + 1.0)), 50)
    xs = np.clip(cf(ts) - cf(r0), 0.0, 1.0)
    vals = f(xs, ts)
    assert np.all(np.diff(vals) <= 1e-14)
