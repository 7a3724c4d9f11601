import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from expmap import DivergentParameters
from expmap.special_functions import (bessel_i1, hyp1f1, lower_incomplete_gamma, poisson_pmf_table,
                                      regularized_gamma_tables, upper_incomplete_gamma)


@given(st.one_of(st.just(0.0), st.floats(1e-100, 40.0)))
def test_bessel_i1_matches_scipy(x):
    assert bessel_i1(x) == pytest.approx(special.iv(1, x), rel=1e-13, abs=1e-300)


@given(st.integers(1, 60), st.floats(0.0, 80.0))
def test_incomplete_gamma_against_mpmath(n, x):
    assert upper_incomplete_gamma(n, x) == pytest.approx(float(mpmath.gammainc(n, x, mpmath.inf)), rel=1e-12)


@given(st.integers(1, 40), st.floats(0.0, 40.0))
def test_incomplete_gamma_complement(n, x):
    total = lower_incomplete_gamma(n, x) + upper_incomplete_gamma(n, x)
    assert total == pytest.approx(math.gamma(n), rel=1e-12)


@given(st.integers(1, 50), st.floats(0.001, 60.0))
def test_regularized_tables(nmax, x):
    P, Q = regularized_gamma_tables(nmax, x)
    n = np.arange(1, nmax + 1)
    np.testing.assert_allclose(Q, special.gammaincc(n, x), rtol=1e-11, atol=1e-300)
    np.testing.assert_allclose(P, special.gammainc(n, x), rtol=1e-11, atol=1e-300)
    np.testing.assert_allclose(P + Q, 1.0, atol=1e-12)


@given(st.floats(0.0, 50.0))
def test_poisson_table_sums_to_one(x):
    pmf = poisson_pmf_table(x, int(x + 12 * math.sqrt(x) + 40))
    assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(pmf >= 0)


@given(st.floats(0.1, 8.0), st.floats(0.5, 8.0), st.floats(-30.0, 30.0))
def test_hyp1f1_against_mpmath(a, b, x):
    want = float(mpmath.hyp1f1(a, b, x))
    assert hyp1f1(a, b, x) == pytest.approx(want, rel=1e-10, abs=1e-14)


def test_hyp1f1_identities():
    for x in np.linspace(0, 10, 21):
        assert hyp1f1(2.5, 2.5, x) == pytest.approx(math.exp(x), rel=1e-12)
        assert hyp1f1(1, 2, x) == pytest.approx(math.expm1(x) / x if x else 1.0, rel=1e-12)


def test_hyp1f1_rejects_bad_parameters():
    with pytest.raises(DivergentParameters):
        hyp1f1(1.0, -2.0, 1.0)
    with pytest.raises(DivergentParameters):
        hyp1f1(1.0, 2.0, 80.0)
