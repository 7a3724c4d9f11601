"""Closed-form prices for two explicit two-state compound-Poisson models.

``CpExpModel``: regimes +/- switch at common rate q; in regime a the price
log jumps up by Exp(lam_a) amounts at rate q, and a switch out of a adds
another Exp(lam_a) jump.

``SkewModel``: both regimes jump down by Exp(1) amounts at rate q and every
switch adds an independent -Exp(1) jump, so xi is compound Poisson with rate
2q and -Exp(1) jumps.

Call prices for ``CpExpModel`` rest on the decomposition

    C_a(k) = e^{-rT} [ 2 E[V d_a(k / V)] + e^{-2qT} (d_{-a}(k) - d_a(k)) ],

where V = exp(X+ + X-) with X+/- independent compound Poisson sums and
d_a is the residue function below. V is an Erlang mixture with
Poisson x Poisson x negative-binomial weights, which gives a triple
series with non-negative terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateDenominator, Truncated
from .estimates import PriceEstimate
from .laws import ExponentialNeg, ExponentialPos
from .model import LevyComponent, MapModel
from .special_functions import (bessel_i1, hyp1f1, poisson_pmf_table,
                                regularized_gamma_tables)


def _label(alpha) -> str:
    """Normalise a regime given as '+'/'-' or as state index 0/1."""
    if isinstance(alpha, str) and alpha in ("+", "-"):
        return alpha
    if not isinstance(alpha, bool) and alpha in (0, 1):
        return "+-"[int(alpha)]
    raise ValueError(f"state must be '+' or '-', got {alpha!r}")


def _flip(alpha) -> str:
    return "-" if _label(alpha) == "+" else "+"


@dataclass(frozen=True)
class CpExpModel:
    q: float
    lam_plus: float
    lam_minus: float
    T: float
    r: float = 0.0

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError("q must be > 0")
        if not (self.lam_plus > 1 and self.lam_minus > 1):
            raise ValueError("jump rates must exceed 1 so that E[Y_T] is finite")
        if not self.T > 0:
            raise ValueError("T must be > 0")

    def lam(self, alpha) -> float:
        return self.lam_plus if _label(alpha) == "+" else self.lam_minus

    def to_map_model(self) -> MapModel:
        q = self.q
        up, dn = ExponentialPos(self.lam_plus), ExponentialPos(self.lam_minus)
        return MapModel(
            ("+", "-"),
            np.array([[-q, q], [q, -q]]),
            (LevyComponent(0.0, 0.0, ((q, up),)), LevyComponent(0.0, 0.0, ((q, dn),))),
            {(0, 1): up, (1, 0): dn},
            self.r,
        )

    @property
    def s_star(self) -> float:
        lp, lm = self.lam_plus, self.lam_minus
        return 2 * lp * lm / (lp + lm)

    def mean_V(self) -> float:
        """E[exp(X+ + X-)] for the two independent compound Poisson sums."""
        q, T = self.q, self.T
        return math.exp(q * T * (1 / (self.lam_plus - 1) + 1 / (self.lam_minus - 1)))

    def mean_Y(self, alpha) -> float:
        """E_alpha[Y_T] from the explicit row sum of exp(T F(1))."""
        ga = self.lam(alpha) / (self.lam(alpha) - 1)
        gb = self.lam(_flip(alpha)) / (self.lam(_flip(alpha)) - 1)
        s = ga + gb
        q, T = self.q, self.T
        return math.exp(-2 * q * T) * (2 * ga * math.exp(q * T * s) + gb - ga) / s


@dataclass(frozen=True)
class SeriesTruncation:
    tol: float = 1e-10
    max_terms_per_axis: int = 1000

    def __post_init__(self):
        if not (self.tol > 0 and self.max_terms_per_axis > 0):
            raise ValueError("tol and max_terms_per_axis must be positive")


@dataclass(frozen=True)
class SkewModel:
    q: float
    T: float
    r: float = 0.0

    def __post_init__(self):
        if not (self.q > 0 and self.T > 0):
            raise ValueError("q and T must be > 0")

    def to_map_model(self) -> MapModel:
        q = self.q
        law = ExponentialNeg(1.0)
        comp = LevyComponent(0.0, 0.0, ((q, law),))
        return MapModel(("+", "-"), np.array([[-q, q], [q, -q]]), (comp, comp),
                        {(0, 1): law, (1, 0): law}, self.r)


class DCoefficients(NamedTuple):
    d1: float
    d2: float
    d3: float
    c: float
    s_star: float


def d_coefficients(m: CpExpModel, alpha) -> DCoefficients:
    """Residue coefficients: d_a(k) = d1 k + d2 for k < 1 and d3 k^c for k >= 1."""
    la, lb = m.lam(alpha), m.lam(_flip(alpha))
    lp, lm = m.lam_plus, m.lam_minus
    den = 2 * lp * lm - (lp + lm)
    if den == 0:
        raise DegenerateDenominator("2 lam+ lam- equals lam+ + lam-")
    w = math.exp(-2 * m.q * m.T)
    s_star = m.s_star
    return DCoefficients(
        d1=-0.5 * w,
        d2=w * la * (lb - 1) / den,
        d3=w * (lb - la) / (2 * den),
        c=1 - s_star,
        s_star=s_star,
    )


def residue_function(m: CpExpModel, alpha, k):
    d1, d2, d3, c, _ = d_coefficients(m, alpha)
    k = np.asarray(k, dtype=float)
    return np.where(k < 1, d1 * k + d2, d3 * np.power(k, c))


def kernel_R(m: CpExpModel, alpha, k):
    """Smooth part of the compound-Poisson kernel on k >= 1 (the unit atom is excluded).

    For k > 1 this is sqrt(c / log k) k^{-lam} I1(2 sqrt(c log k)), c = q T lam;
    its limit at k = 1 is c. The mass against dk/k equals e^{qT} - 1.
    """
    lam = m.lam(alpha)
    c = m.q * m.T * lam
    k = np.asarray(k, dtype=float)
    L = np.log(np.where(k > 1, k, 2.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        body = np.sqrt(c / L) * np.power(np.where(k > 1, k, 2.0), -lam) * bessel_i1(2 * np.sqrt(c * L))
    out = np.where(k > 1, body, np.where(k == 1, c, 0.0))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Erlang-mixture machinery for V = exp(X+ + X-)
# ---------------------------------------------------------------------------

def _shape_pmf(m: CpExpModel, n_max: int, r_max: int):
    """P(K = j) for the Erlang shape K = n + mm + r at rate a = max(lam).

    n counts jumps at the larger rate, mm at the smaller one, and r is the
    negative-binomial excess from rewriting Exp(b) as a geometric sum of
    Exp(a). Returns (pmf over j, a).
    """
    a, b = max(m.lam_plus, m.lam_minus), min(m.lam_plus, m.lam_minus)
    p, rho = b / a, (a - b) / a
    qT = m.q * m.T
    pois = poisson_pmf_table(qT, n_max)  # shape (n_max + 1,)
    mm = np.arange(n_max + 1)[:, None]
    r = np.arange(r_max + 1)[None, :]
    # NB(r; mm, p) = C(mm + r - 1, r) p^mm rho^r, with NB(.; 0) = delta_0
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = gammaln(np.maximum(mm + r, 1)) - gammaln(r + 1.0) - gammaln(np.maximum(mm, 1))
        lognb = logc + mm * math.log(p) + (r * math.log(rho) if rho > 0 else np.where(r == 0, 0.0, -np.inf))
    nb = np.where(mm == 0, (r == 0).astype(float), np.exp(lognb))
    # innermost r, then mm: distribution of mm + r
    inner = pois[:, None] * nb
    jm = mm + r
    pm = np.bincount(jm.ravel(), weights=inner.ravel(), minlength=n_max + r_max + 1)
    # outermost n
    pk = np.convolve(pois, pm)
    return pk, a


def _mixture_terms(a: float, s_star: float, L: float, jmax: int):
    """Per-shape functionals for W ~ Gamma(j, a), j = 1..jmax, at threshold L > 0.

    T1 = P(W > L), T2 = E[e^W; W > L], T3 = E[e^{s* W}; W <= L].
    """
    _, Q1 = regularized_gamma_tables(jmax, a * L)
    _, Q2 = regularized_gamma_tables(jmax, (a - 1) * L)
    j = np.arange(1, jmax + 1)
    T2 = np.exp(j * math.log(a / (a - 1))) * Q2
    y = (a - s_star) * L
    # T3 = e^{-y} (aL)^j / j! h_j with h_j = sum_m y^m j!/(j+m)!  (backward recursion)
    extra = int(y + 12 * math.sqrt(y + 1) + 40)
    h = np.empty(jmax + extra + 1)
    h[-1] = 1.0
    for jj in range(jmax + extra - 1, -1, -1):
        h[jj] = 1.0 + y / (jj + 1) * h[jj + 1]
    lf = np.cumsum(np.log(j))
    T3 = np.exp(-y + j * math.log(a * L) - lf) * h[1:jmax + 1]
    return Q1, T2, T3


def _triple_sum(m: CpExpModel, alpha, k: float, trunc: SeriesTruncation):
    """2 E[V d_a(k/V)] for k > 1 with an explicit truncation bound (no e^{-2qT} scaling)."""
    d1, d2, d3, c, s_star = d_coefficients(m, alpha)
    w = math.exp(-2 * m.q * m.T)
    dh2, dh3 = d2 / w, d3 / w
    L = math.log(k)
    cap = trunc.max_terms_per_axis
    qT = m.q * m.T
    n_max = min(cap, int(qT + 10 * math.sqrt(qT) + 30))
    r_max = min(cap, 32)
    EV = m.mean_V()
    while True:
        pk, a = _shape_pmf(m, n_max, r_max)
        jmax = pk.size - 1
        growth = np.exp(np.arange(jmax + 1) * math.log(a / (a - 1)))
        miss0 = max(1.0 - pk.sum(), 0.0)
        miss1 = max(EV - float(np.dot(pk, growth)), 0.0)
        bound = 2 * (0.5 * k * miss0 + abs(dh2) * miss1 + abs(dh3) * k * miss0)
        # the missing masses are differences of O(1) and O(E[V]) sums: rounding sets a floor
        floor = 2 * 64 * np.finfo(float).eps * (0.5 * k + abs(dh2) * EV + abs(dh3) * k)
        target = max(trunc.tol, floor)
        if bound <= target or (n_max >= cap and r_max >= cap):
            break
        n_max, r_max = min(cap, 2 * n_max), min(cap, 2 * r_max)
    if bound > target:
        raise Truncated(cap, bound)
    bound = max(bound, floor)
    T1, T2, T3 = _mixture_terms(a, s_star, L, jmax)
    kc = k ** c
    phi = -0.5 * k * T1 + dh2 * T2 + dh3 * kc * T3
    total = pk[0] * dh3 * kc + float(np.dot(pk[1:], phi))
    return 2 * total, bound, {"n_max": n_max, "r_max": r_max, "shapes": jmax}


def call_price_series(m: CpExpModel, alpha, k: float, trunc: SeriesTruncation | None = None) -> PriceEstimate:
    """European call on Y_T (Y_0 = 1) by the Erlang-mixture triple series."""
    trunc = trunc or SeriesTruncation()
    if not k > 0:
        raise ValueError("strike must be > 0")
    s = _label(alpha)
    disc = math.exp(-m.r * m.T)
    w = math.exp(-2 * m.q * m.T)
    d_own = d_coefficients(m, s)
    if k <= 1:
        # V >= 1 >= k, so only the k < 1 branch of d is ever used
        dh2 = d_own.d2 / w
        core = 2 * (-0.5 * k + dh2 * m.mean_V())
        bound, info = 0.0, {"regime": "k<=1"}
    else:
        core, bound, info = _triple_sum(m, s, k, trunc)
    edge = float(residue_function(m, _flip(s), k) - residue_function(m, s, k))
    value = disc * (core + edge)
    return PriceEstimate(max(value, 0.0), disc * bound + 1e-15 * abs(disc * core), "series", info)


def atm_price(m: CpExpModel, alpha, trunc: SeriesTruncation | None = None) -> PriceEstimate:
    """At-the-money call, with E[V] resummed as a series of 1F1(r+1; 2; x) terms."""
    trunc = trunc or SeriesTruncation()
    s = _label(alpha)
    a, b = max(m.lam_plus, m.lam_minus), min(m.lam_plus, m.lam_minus)
    qT = m.q * m.T
    rho = a / (a - 1)          # E[e^E] for one Exp(a) summand
    ratio = (a - b) / (a - 1)  # NB excess ratio times rho, < 1 since b > 1
    x = qT * (b / a) * rho
    total, comp = 1.0, 0.0
    r = 0
    while True:
        term = ratio ** r * x * hyp1f1(r + 1, 2, x)
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        r += 1
        if term < 1e-14 * total:
            break
        if r > 50 * trunc.max_terms_per_axis:
            raise Truncated(r, term)
    EV = math.exp(qT * (rho - 1)) * math.exp(-qT) * total
    w = math.exp(-2 * qT)
    d_own, d_other = d_coefficients(m, s), d_coefficients(m, _flip(s))
    dh2, dh3 = d_own.d2 / w, d_own.d3 / w
    core = 2 * (w * dh3 - 0.5 * (1 - w) + dh2 * (EV - w))
    value = math.exp(-m.r * m.T) * (core + d_other.d3 - d_own.d3)
    return PriceEstimate(max(value, 0.0), 1e-13 * max(1.0, abs(EV)), "series", {"r_terms": r, "mean_V": EV})


# ---------------------------------------------------------------------------
# Skew model
# ---------------------------------------------------------------------------

def skew_call_price(m: SkewModel, k: float, trunc: SeriesTruncation | None = None) -> PriceEstimate:
    """Call on Y_T = exp(-(sum of N Exp(1) jumps)), N ~ Poisson(2qT); zero for k >= 1."""
    trunc = trunc or SeriesTruncation()
    if not k > 0:
        raise ValueError("strike must be > 0")
    disc = math.exp(-m.r * m.T)
    if k >= 1:
        return PriceEstimate(0.0, 0.0, "series", {"regime": "k>=1"})
    L = math.log(1 / k)
    lam = 2 * m.q * m.T
    cap = trunc.max_terms_per_axis
    M = int(lam + 10 * math.sqrt(lam) + 30)
    if M > cap:
        M = cap
    pmf = poisson_pmf_table(lam, M + 1)  # P(N = n), n = 0..M+1
    tail = max(1.0 - pmf.sum(), 0.0)
    bound = disc * (1 + k) * tail
    if bound > trunc.tol:
        raise Truncated(cap, bound)
    P2, _ = regularized_gamma_tables(M + 1, 2 * L)
    P1, _ = regularized_gamma_tables(M + 1, L)
    n = np.arange(1, M + 2)
    # E[e^{-W}; W < L] = 2^{-n} P(n, 2L) for W ~ Gamma(n, 1)
    terms = pmf[1:] * (np.exp(-n * math.log(2.0)) * P2 - k * P1)
    value = disc * (pmf[0] * (1 - k) + float(terms.sum()))
    return PriceEstimate(max(value, 0.0), bound, "series", {"terms": M + 1})


def skew_price_at_zero(m: SkewModel) -> float:
    """Limit of the call price as k -> 0: the discounted mean e^{-rT} E[Y_T] = e^{-(r+q)T}."""
    return math.exp(-(m.r + m.q) * m.T)


# ---------------------------------------------------------------------------
# Structural detection (used by the CLI)
# ---------------------------------------------------------------------------

def _single_jump(comp: LevyComponent):
    if comp.a != 0 or comp.sigma != 0 or len(comp.jumps) != 1:
        return None
    return comp.jumps[0]


def match_cp_exp(model: MapModel, T: float) -> CpExpModel | None:
    if model.n_states != 2:
        return None
    q = model.q[0, 1]
    if q <= 0 or model.q[1, 0] != q:
        return None
    lams = []
    for i, j in ((0, 1), (1, 0)):
        jump = _single_jump(model.levy[i])
        law = model.trans_jump.get((i, j))
        if jump is None or not isinstance(jump[1], ExponentialPos) or jump[0] != q:
            return None
        if not isinstance(law, ExponentialPos) or law.rate != jump[1].rate:
            return None
        lams.append(law.rate)
    if min(lams) <= 1:
        return None
    return CpExpModel(float(q), lams[0], lams[1], T, model.r)


def match_skew(model: MapModel, T: float) -> SkewModel | None:
    if model.n_states != 2:
        return None
    q = model.q[0, 1]
    if q <= 0 or model.q[1, 0] != q:
        return None
    for i, j in ((0, 1), (1, 0)):
        jump = _single_jump(model.levy[i])
        law = model.trans_jump.get((i, j))
        if jump is None or jump[0] != q or jump[1] != ExponentialNeg(1.0) or law != ExponentialNeg(1.0):
            return None
    return SkewModel(float(q), T, model.r)
