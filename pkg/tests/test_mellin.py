import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expmap import (ContourSpec, CpExpModel, ExponentialNeg, GridTooCoarse, LevyComponent, MapModel,
                    McConfig, NoValidContour, PayoffSpec, call_curve, load_shipped, pide_residual,
                    price_call, price_general, price_put, put_curve, select_contour, transform_matrix)
from expmap.mellin_pricer import CallPriceSurface
from expmap.simulator import mc_european, mc_european_curve

JD = load_shipped("jump_diffusion")
TRI = load_shipped("three_state")


def forward(model, state, T, spot=1.0):
    return spot * math.exp(-model.r * T) * transform_matrix(model, T, 1.0)[model.index(state)].sum()


@pytest.mark.parametrize("model, state", [(JD, "calm"), (JD, "stress"), (TRI, "high")])
def test_put_call_parity(model, state):
    ks = np.array([0.6, 0.9, 1.0, 1.2, 1.8])
    T = 0.8
    c, ce, _ = call_curve(model, state, ks, T, spot=1.1)
    p, pe, _ = put_curve(model, state, ks, T, spot=1.1)
    lhs = c - p
    rhs = forward(model, state, T, 1.1) - ks * math.exp(-model.r * T)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


@pytest.mark.parametrize("model, state", [(JD, "stress"), (TRI, "mid")])
def test_call_matches_mc(model, state):
    ks = [0.7, 1.0, 1.3]
    v, _, _ = call_curve(model, state, ks, 1.0)
    mc, se = mc_european_curve(model, state, 1.0, ks, 1.0, McConfig(n_paths=200_000))
    assert np.all(np.abs(v - mc) <= 4 * se)


def test_spot_route_agrees_with_strike_route():
    T = 0.7
    spots = [0.8, 1.0, 1.25]
    a = price_general(JD, "calm", spots, T, PayoffSpec.call(1.0))
    b = [price_call(JD, "calm", s, 1.0, T) for s in spots]
    for x, y in zip(a, b):
        assert x.value == pytest.approx(y.value, abs=1e-8)


def test_digital_against_mc():
    est = price_general(TRI, "low", 1.0, 1.0, PayoffSpec.digital(1.05))
    mc = mc_european(TRI, "low", 1.0, PayoffSpec.digital(1.05), 1.0, McConfig(n_paths=200_000))
    assert abs(est.value - mc.value) <= 4 * mc.error


def test_custom_payoff_power():
    # H(x) = x^2 1{x < 1} has MH(z) = 1 / (z + 2) on Re z > -2
    pay = PayoffSpec.custom(lambda x: np.where(x < 1, x * x, 0.0), lambda z: 1.0 / (z + 2.0), (-2.0, math.inf))
    est = price_general(JD, "calm", 1.0, 0.5, pay)
    mc = mc_european(JD, "calm", 1.0, pay, 0.5, McConfig(n_paths=200_000))
    assert abs(est.value - mc.value) <= 4 * mc.error


def test_deterministic_model_prices_intrinsic():
    zero = load_shipped("zero")
    ks = [0.4, 0.9, 1.0, 1.6]
    v, e, _ = call_curve(zero, "a", ks, 1.0)
    np.testing.assert_allclose(v, np.maximum(1.0 - np.array(ks), 0) * math.exp(-0.05), atol=1e-12)


def test_error_bound_covers_actual_error():
    cp = CpExpModel(1.0, 2.0, 3.0, 1.0)
    ks = np.linspace(0.2, 3.0, 7)
    loose, err, _ = call_curve(cp.to_map_model(), "+", ks, 1.0, tol=1e-6)
    tight, _, _ = call_curve(cp.to_map_model(), "+", ks, 1.0, tol=1e-12)
    assert np.all(np.abs(loose - tight) <= err + 1e-12)


def test_put_without_admissible_line():
    # negative exponential jumps of rate 0.8: no moment of order <= -0.8, so puts have no strip
    comp = LevyComponent(0.0, 0.0, ((1.0, ExponentialNeg(0.8)),))
    m = MapModel(("a", "b"), [[-1, 1], [1, -1]], (comp, comp), {})
    with pytest.raises(NoValidContour):
        price_put(m, "a", 1.0, 1.0, 1.0)
    assert price_call(m, "a", 1.0, 1.0, 1.0).value > 0


def test_contour_validation():
    with pytest.raises(ValueError):
        ContourSpec(0.5, 10.0, 0.3)
    with pytest.raises(ValueError):
        ContourSpec(0.5, 10.0, 0.5)
    spec = select_contour(JD, 1.0, PayoffSpec.call(1.0), "calm")
    lo, hi = spec.interval
    assert lo < spec.c < hi and spec.h <= spec.U / 50


@settings(max_examples=10)
@given(st.floats(0.3, 3.0), st.floats(0.1, 2.0))
def test_call_bounds_and_monotonicity(k, T):
    ks = np.array([k, k * 1.05])
    c, _, _ = call_curve(TRI, "mid", ks, T)
    fwd = forward(TRI, "mid", T)
    disc = math.exp(-TRI.r * T)
    assert np.all(c >= np.maximum(fwd - ks * disc, 0) - 1e-10)
    assert np.all(c <= fwd + 1e-10)
    assert c[1] <= c[0] + 1e-12


def test_pide_spacing_guard():
    surf = CallPriceSurface(JD, 1.0, 0.5)
    with pytest.raises(GridTooCoarse):
        pide_residual(JD, "calm", 1.0, 0.5, surf, dy=0.1, dt=0.1)


def test_pide_residual_small_with_diffusion():
    surf = CallPriceSurface(JD, 1.0, 0.5)
    r = [pide_residual(JD, "calm", 1.1, 0.5, surf, dy=h, dt=h, kinks=[1.0]) for h in (2e-3, 1e-3)]
    assert abs(r[1]) < 1e-4
    assert abs(r[1]) < abs(r[0])
