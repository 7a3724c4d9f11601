"""Bessel I1, integer-order incomplete gamma functions and the confluent hypergeometric 1F1."""
from __future__ import annotations

import math

import numpy as np

from .errors import DivergentParameters

_EPS = 2.0 ** -53


def bessel_i1(x):
    """Modified Bessel function I1 for x >= 0 from its power series (all terms positive)."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("bessel_i1 is implemented for x >= 0")
    half = 0.5 * xa
    h2 = half * half
    term = half.copy()
    total = term.copy()
    n = 0
    while True:
        term = term * h2 / ((n + 1) * (n + 2))
        total = total + term
        n += 1
        # terms decrease once n exceeds half/1; stop when negligible everywhere
        if n > np.max(half, initial=0.0) and np.all(term <= _EPS * 0.25 * total):
            break
    return total if total.ndim else float(total)


def _log_factorials(n: int) -> np.ndarray:
    out = np.zeros(n + 1)
    if n:
        out[1:] = np.cumsum(np.log(np.arange(1, n + 1)))
    return out


def poisson_pmf_table(x, jmax: int) -> np.ndarray:
    """e^{-x} x^j / j! for j = 0..jmax, shape (jmax + 1,) + shape(x)."""
    x = np.asarray(x, dtype=float)
    j = np.arange(jmax + 1).reshape((-1,) + (1,) * x.ndim)
    lf = _log_factorials(jmax).reshape(j.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        logt = j * np.log(x) - x - lf
    out = np.exp(logt)
    # x = 0: only j = 0 survives
    out = np.where(x == 0, (j == 0).astype(float), out)
    return out


def regularized_gamma_tables(nmax: int, x):
    """(P, Q) with P[n-1] = gamma(n, x)/(n-1)! and Q[n-1] = Gamma(n, x)/(n-1)!, n = 1..nmax.

    Both come from exact finite Poisson sums; the small one of each pair is
    summed directly so neither suffers cancellation.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be >= 0")
    xmax = float(np.max(x, initial=0.0))
    jmax = int(nmax + xmax + 12 * math.sqrt(xmax + 1) + 40)
    pmf = poisson_pmf_table(x, jmax)
    head = np.cumsum(pmf, axis=0)  # head[n-1] = sum_{j<n}
    tail = np.cumsum(pmf[::-1], axis=0)[::-1]  # tail[n] = sum_{j>=n}
    Q = head[:nmax]
    P = tail[1:nmax + 1]
    return P, Q


def upper_incomplete_gamma(n: int, x: float) -> float:
    """Gamma(n, x) = (n-1)! e^{-x} sum_{j<n} x^j / j! for integer n >= 1."""
    n = _check_order(n)
    if x < 0:
        raise ValueError("x must be >= 0")
    term = 1.0
    total = 1.0
    for j in range(1, n):
        term *= x / j
        total += term
    return math.factorial(n - 1) * math.exp(-x) * total


def lower_incomplete_gamma(n: int, x: float) -> float:
    """gamma(n, x) = (n-1)! - Gamma(n, x)."""
    n = _check_order(n)
    return math.factorial(n - 1) - upper_incomplete_gamma(n, x)


def _check_order(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"order must be a positive integer, got {n!r}")
    return int(n)


def _kahan_series(a: float, b: float, x: float, max_terms: int) -> float:
    total, comp = 1.0, 0.0
    term = 1.0
    for k in range(max_terms):
        ratio = (a + k) * x / ((b + k) * (k + 1))
        term *= ratio
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if term == 0.0:
            return total
        nxt = abs((a + k + 1) * x / ((b + k + 1) * (k + 2)))
        if nxt < 1.0:
            tail = abs(term) * nxt / (1.0 - nxt)
            if tail <= 1e-17 * abs(total):
                return total
    raise DivergentParameters(f"1F1({a}, {b}; {x}) did not converge in {max_terms} terms")


def hyp1f1(a: float, b: float, x: float, max_terms: int = 10_000) -> float:
    """Confluent hypergeometric 1F1(a; b; x) for |x| <= 50.

    Negative x goes through Kummer's transformation so the summed series
    has no sign changes for a, b > 0.
    """
    if b <= 0 and float(b).is_integer():
        raise DivergentParameters(f"b={b} is a non-positive integer")
    if abs(x) > 50:
        raise DivergentParameters(f"|x|={abs(x)} exceeds the series range 50")
    if x == 0:
        return 1.0
    if x < 0 and not (a <= 0 and float(a).is_integer()):
        return math.exp(x) * _kahan_series(b - a, b, -x, max_terms)
    return _kahan_series(a, b, x, max_terms)
