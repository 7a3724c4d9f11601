import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expmap import (CpExpModel, ExponentialPos, LevyComponent, MapModel, NotIntegrable, SkewModel, check_integrability, discount_shift,
                    drift_correct, generator_values, load_shipped, martingale_class, matrix_exponent)

EX31 = CpExpModel(1.0, 2.0, 3.0, 1.0).to_map_model()


def test_example31_generator_and_class():
    np.testing.assert_allclose(generator_values(EX31), [2.0, 1.0], atol=1e-14)
    assert martingale_class(EX31).classification == "submartingale"


@given(st.floats(0.05, 3.0))
def test_skew_generator_is_minus_q(q):
    m = SkewModel(q, 1.0).to_map_model()
    np.testing.assert_allclose(generator_values(m), [-q, -q], rtol=1e-12)
    assert martingale_class(m).classification == "supermartingale"


@pytest.mark.parametrize("name", ["example31", "jump_diffusion", "three_state"])
def test_drift_correct_gives_martingale(name):
    m = drift_correct(load_shipped(name))
    assert martingale_class(m).classification == "martingale"
    # row sums of F(1) vanish: psi_a(1) = -sum_b q_ab (G_ab(1) - 1)
    np.testing.assert_allclose(matrix_exponent(m, 1.0).sum(axis=1), 0.0, atol=1e-12)


def test_neither_when_signs_mix():
    assert martingale_class(load_shipped("three_state")).classification == "neither"


def test_not_integrable_at_one():
    m = CpExpModel(1.0, 2.0, 3.0, 1.0).to_map_model()
    rep = check_integrability(m, 2.5)
    assert not rep.integrable and "+" in rep.witness and rep.uniformly_integrable == "no"
    comp = LevyComponent(0.0, 0.0, ((1.0, ExponentialPos(0.9)),))
    bad = MapModel(("x", "y"), [[-1, 1], [1, -1]], (comp, comp), {})
    with pytest.raises(NotIntegrable):
        generator_values(bad)
    rep = martingale_class(bad)
    assert rep.classification == "neither" and not rep.finite


def test_uniform_integrability_uses_cramer_number():
    jd = load_shipped("jump_diffusion")  # theta ~ 1.058
    assert check_integrability(jd, 1.0).uniformly_integrable == "yes"
    assert check_integrability(jd, 1.5).uniformly_integrable == "no"
    assert check_integrability(EX31, 1.0).uniformly_integrable == "no"


def test_discount_shift_lowers_generator_by_rate():
    jd = load_shipped("jump_diffusion")
    np.testing.assert_allclose(generator_values(discount_shift(jd)), generator_values(jd) - jd.r, atol=1e-14)


def test_report_json_has_no_nan():
    import json
    rep = check_integrability(load_shipped("example32"), 1.0).to_json()
    text = json.dumps(rep, allow_nan=False)
    assert json.loads(text)["theta"] == "inf"
