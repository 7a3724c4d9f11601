import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expmap import (Degenerate, ExponentialNeg, ExponentialPos, LevyComponent, MapModel, ModelError,
                    Normal, StripViolation, TwoSidedExponential, load_shipped, shipped_model_names)
from expmap.laws import law_from_json

rates = st.floats(0.2, 20.0)

laws = st.one_of(
    rates.map(ExponentialPos),
    rates.map(ExponentialNeg),
    st.tuples(st.floats(-2, 2), st.floats(0, 2)).map(lambda t: Normal(*t)),
    st.tuples(rates, rates, st.floats(0, 1)).map(lambda t: TwoSidedExponential(*t)),
    st.floats(-3, 3).map(Degenerate),
)


@given(laws)
def test_mgf_is_one_at_origin(law):
    assert law.mgf(0.0) == pytest.approx(1.0, abs=1e-15)


@given(laws, st.floats(-0.95, 0.95))
def test_mgf_matches_quadrature(law, frac):
    lo, hi = law.strip
    lo, hi = max(lo, -3.0), min(hi, 3.0)
    z = 0.5 * (lo + hi) + frac * 0.5 * (hi - lo)
    got = law.mgf(z)
    want = law.integrate(lambda u: np.exp(z * u), growth=z, tol=1e-12)
    assert got == pytest.approx(want, rel=1e-8)


@given(laws)
def test_law_json_roundtrip(law):
    assert law_from_json(json.loads(json.dumps(law.to_json())), "x") == law


def test_strip_violation_raised_not_nan():
    with pytest.raises(StripViolation):
        ExponentialPos(2.0).mgf(2.0)
    with pytest.raises(StripViolation):
        ExponentialNeg(1.0).mgf(-1.5)


def test_bad_law_parameters():
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ModelError):
            ExponentialPos(bad)
    with pytest.raises(ModelError):
        TwoSidedExponential(1.0, 1.0, 1.5)
    with pytest.raises(ModelError):
        Normal(0.0, -1.0)


def _base():
    return {"states": ["a", "b"], "q": [[-1.0, 1.0], [2.0, -2.0]],
            "levy": {"a": {"a": 0.1, "sigma": 0.2, "jumps": []}, "b": {"a": -0.1}},
            "trans_jumps": {"a->b": {"kind": "ExponentialPos", "params": {"rate": 4.0}}}, "r": 0.01}


@pytest.mark.parametrize("mutate, path", [
    (lambda o: o["q"][0].__setitem__(1, -1.0), "q"),
    (lambda o: o["q"][0].__setitem__(0, -0.5), "q[0]"),
    (lambda o: o.__setitem__("q", [[0.0, 0.0], [1.0, -1.0]]), "q"),
    (lambda o: o["levy"]["a"].__setitem__("sigma", -1.0), "levy.a.sigma"),
    (lambda o: o["levy"]["a"].__setitem__("jumps", [{"rate": 1.0, "law": {"kind": "Cauchy", "params": {}}}]),
     "levy.a.jumps[0].law"),
    (lambda o: o["trans_jumps"].__setitem__("a->c", {"kind": "Degenerate", "params": {"point": 0.0}}),
     "trans_jumps.a->c"),
    (lambda o: o.__setitem__("states", ["a", "a"]), "states"),
])
def test_model_errors_carry_paths(mutate, path):
    obj = _base()
    mutate(obj)
    with pytest.raises(ModelError) as info:
        MapModel.from_json(obj)
    assert info.value.path.startswith(path)


def test_row_sums_are_exactly_zero():
    obj = _base()
    obj["q"] = [[-0.1 - 0.2, 0.1 + 0.2], [0.7, -0.7]]
    m = MapModel.from_json(obj)
    assert np.all(m.q.sum(axis=1) == 0.0)


@pytest.mark.parametrize("name", shipped_model_names())
def test_shipped_models_roundtrip(name):
    m = load_shipped(name)
    again = MapModel.from_json(json.loads(m.dumps()))
    assert again.dumps() == m.dumps()


def test_strip_is_intersection_of_components():
    m = load_shipped("three_state")
    assert m.strip == (-5.0, 10.0)
    names = [n for n, _ in m.component_strips()]
    assert any("high" in n for n in names)


def test_with_drifts_keeps_everything_else():
    m = load_shipped("jump_diffusion")
    m2 = m.with_drifts([0.0, 0.0])
    assert [c.a for c in m2.levy] == [0.0, 0.0]
    assert m2.trans_jump == m.trans_jump and np.array_equal(m2.q, m.q)


def test_levy_component_rejects_negative_rate():
    with pytest.raises(ModelError):
        LevyComponent(0.0, 0.0, ((-1.0, ExponentialPos(1.0)),))
