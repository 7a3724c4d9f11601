"""European pricing by Mellin transforms, vertical-contour inversion and a PIDE residual check.

Strike route (calls and puts, Y_0 = 1)::

    M(u) = int_0^inf k^{u-1} C(k) dk = e^{-rT} / (u (u + 1)) * sum_b exp(T F(u + 1))[a, b]

with Re u in (0, s) for calls and in the negative-moment interval for puts.
Spot route (any payoff H with known Mellin transform MH)::

    C_H(y) = (1 / 2 pi i) int y^{-z} e^{-rT} MH(z) sum_b exp(T F(-z))[a, b] dz.

Both are inverted by the trapezoid rule on the half line y >= 0 (the other
half is the complex conjugate). When the starting regime has no Brownian
part, the probability mass of "no event before T" is a point mass of xi_T
at a T; it is removed from the transform and priced exactly, which turns
an O(|u|^-2) integrand into an O(|u|^-3) one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GridTooCoarse, NoValidContour, PoleProximity, StripViolation
from .estimates import PriceEstimate
from .laws import STRIP_MARGIN, Degenerate
from .map_core import transform_matrix
from .model import MapModel

POLE_DISTANCE = 0.05
UNBOUNDED_WIDTH = 2.0
PEAK_RATIO = 1e-12
U_START = 32.0
U_CAP = float(2 ** 20)
INITIAL_NODES = 2048
MAX_NODES = 2 ** 22
ABSCISSA_GRID = 41


# ---------------------------------------------------------------------------
# Payoffs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PayoffSpec:
    """Payoff H(x) with its Mellin transform in spot, MH(z) = int_0^inf x^{z-1} H(x) dx.

    ``strip`` is the open interval of Re z on which MH exists.
    """

    kind: str
    strike: float = math.nan
    payoff: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    mellin: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    strip: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        if self.kind in ("call", "put", "digital"):
            if not self.strike > 0:
                raise ValueError("strike must be > 0")
        elif self.kind == "custom":
            if self.payoff is None or self.mellin is None:
                raise ValueError("custom payoffs need both payoff and mellin callables")
            if not self.strip[0] < self.strip[1]:
                raise NoValidContour(f"custom payoff strip {self.strip} is empty")
        else:
            raise ValueError(f"unknown payoff kind {self.kind!r}")

    @classmethod
    def call(cls, k: float) -> "PayoffSpec":
        return cls("call", k, strip=(-math.inf, -1.0))

    @classmethod
    def put(cls, k: float) -> "PayoffSpec":
        return cls("put", k, strip=(0.0, math.inf))

    @classmethod
    def digital(cls, k: float) -> "PayoffSpec":
        """Pays 1 when the spot ends above k."""
        return cls("digital", k, strip=(-math.inf, 0.0))

    @classmethod
    def custom(cls, payoff, mellin, strip) -> "PayoffSpec":
        return cls("custom", math.nan, payoff, mellin, (float(strip[0]), float(strip[1])))

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k = self.strike
        if self.kind == "call":
            return np.maximum(x - k, 0.0)
        if self.kind == "put":
            return np.maximum(k - x, 0.0)
        if self.kind == "digital":
            return (x > k).astype(float)
        return np.asarray(self.payoff(x), dtype=float)

    def mellin_transform(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        k = self.strike
        if self.kind in ("call", "put"):
            return np.exp((z + 1) * math.log(k)) / (z * (z + 1))
        if self.kind == "digital":
            return -np.exp(z * math.log(k)) / z
        return np.asarray(self.mellin(z), dtype=complex)


@dataclass(frozen=True)
class ContourSpec:
    """Vertical line Re = c, truncated to |Im| <= U, trapezoid step h."""

    c: float
    U: float
    h: float
    interval: tuple[float, float] = (math.nan, math.nan)

    def __post_init__(self):
        if not (self.U > 0 and self.h > 0):
            raise ValueError("U and h must be positive")
        n = self.U / self.h
        if abs(n - round(n)) > 1e-9 * n:
            raise ValueError("U/h must be an integer")
        if self.h > self.U / 50 * (1 + 1e-12):
            raise ValueError("h must not exceed U/50")

    @property
    def n_intervals(self) -> int:
        return int(round(self.U / self.h))

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.U, self.n_intervals + 1)


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def _is_null(law) -> bool:
    return isinstance(law, Degenerate) and law.point == 0.0


def _frozen_atom(model: MapModel, i: int, T: float) -> tuple[float, float]:
    """(probability, location) of the point mass of xi_T at a_i T.

    That mass is "no switch and no moving jump before T", or 1 when xi is
    deterministic (no diffusion, no moving jumps anywhere, equal drifts).
    """
    comp = model.levy[i]
    if comp.sigma > 0:
        return 0.0, 0.0
    frozen = all(c.sigma == 0 and c.a == comp.a and all(_is_null(law) for _, law in c.jumps)
                 for c in model.levy)
    if frozen and all(_is_null(law) for *_, law in model.active_transitions()):
        return 1.0, comp.a * T
    rate = model.exit_rates[i] + sum(r for r, law in comp.jumps if not _is_null(law))
    return math.exp(-T * rate), comp.a * T


def _row_moment(model: MapModel, i: int, T: float, w) -> np.ndarray:
    """sum_b exp(T F(w))[i, b] = E_i[exp(w xi_T)]."""
    E = transform_matrix(model, T, w)
    return E[..., i, :].sum(axis=-1)


def _check_poles(u, far: float = 1e-8):
    u = np.asarray(u)
    if np.any(np.abs(u) < far) or np.any(np.abs(u + 1) < far):
        raise PoleProximity("u is within 1e-8 of a pole at 0 or -1")


def call_mellin_in_strike(model: MapModel, alpha, T: float, u):
    """Mellin transform in strike of k -> C(k) for Y_0 = 1."""
    u = np.asarray(u, dtype=complex)
    _check_poles(u)
    if np.any(u.real <= 0):
        raise StripViolation("call strike transform (needs Re u > 0)", float(np.min(u.real)), (0.0, math.inf))
    i = model.index(alpha)
    out = math.exp(-model.r * T) / (u * (u + 1)) * _row_moment(model, i, T, u + 1)
    return out if out.ndim else complex(out)


def put_mellin_in_strike(model: MapModel, alpha, T: float, u):
    u = np.asarray(u, dtype=complex)
    _check_poles(u)
    if np.any(u.real >= -1):
        raise StripViolation("put strike transform (needs Re u < -1)", float(np.max(u.real)), (-math.inf, -1.0))
    i = model.index(alpha)
    out = math.exp(-model.r * T) / (u * (u + 1)) * _row_moment(model, i, T, u + 1)
    return out if out.ndim else complex(out)


def _strike_interval(model: MapModel, kind: str) -> tuple[float, float]:
    lo, hi = model.strip
    if kind == "call":
        top = hi - 1.0 - STRIP_MARGIN
        a, b = 0.0, min(top, UNBOUNDED_WIDTH) if math.isinf(hi) else top
    else:
        bottom = lo + STRIP_MARGIN
        a, b = (max(bottom, -1.0 - UNBOUNDED_WIDTH) if math.isinf(lo) else bottom), -1.0
    return a, b


def _spot_interval(model: MapModel, payoff: PayoffSpec) -> tuple[float, float]:
    # need -z inside the model strip and z inside the payoff strip
    lo, hi = model.strip
    a = max(-hi + STRIP_MARGIN, payoff.strip[0])
    b = min(-lo - STRIP_MARGIN, payoff.strip[1])
    if math.isinf(a) and math.isinf(b):
        a, b = -UNBOUNDED_WIDTH / 2, UNBOUNDED_WIDTH / 2
    elif math.isinf(a):
        a = b - UNBOUNDED_WIDTH
    elif math.isinf(b):
        b = a + UNBOUNDED_WIDTH
    return a, b


def _shrink(interval, poles=()) -> tuple[float, float]:
    a, b = interval
    if any(abs(a - p) < 1e-12 for p in poles):
        a += POLE_DISTANCE
    if any(abs(b - p) < 1e-12 for p in poles):
        b -= POLE_DISTANCE
    return a, b


class _Integrand:
    """Regularised transform on the line Re = c plus the exactly priced atom.

    For the strike route, values(y) returns M(c + iy) with the atom removed;
    the inverse is C(k) = (1/pi) int_0^inf Re[k^{-(c+iy)} values(y)] dy.
    For the spot route the role of k is played by the spot y and z = c + iy.
    """

    def __init__(self, model: MapModel, alpha, T: float, route: str, payoff: PayoffSpec | None = None):
        self.model, self.T, self.route, self.payoff = model, T, route, payoff
        self.i = model.index(alpha)
        self.disc = math.exp(-model.r * T)
        self.p0, self.x0 = _frozen_atom(model, self.i, T)

    def interval(self) -> tuple[float, float]:
        """Admissible open interval for the abscissa (before pole margins)."""
        if self.route in ("call", "put"):
            a, b = _strike_interval(self.model, self.route)
        else:
            a, b = _spot_interval(self.model, self.payoff)
        if not a < b:
            raise NoValidContour(
                f"no admissible abscissa for {self.route}: interval ({a:.6g}, {b:.6g}) is empty "
                f"(model strip {self.model.strip})")
        return a, b

    def abscissa(self, logx: float = 0.0) -> float:
        """Damping c minimising the peak x^{-c} |M(c)| over the admissible interval.

        The peak sits at y = 0; the trapezoid sum cancels from that size down
        to the price, so a small peak keeps the rounding error small.
        """
        a, b = self.interval()
        poles = () if self.route == "spot" and self.payoff.kind == "custom" else (0.0, -1.0)
        lo, hi = _shrink((a, b), poles)
        if not lo < hi:
            raise NoValidContour(f"interval ({a:.6g}, {b:.6g}) is narrower than the pole margin")
        grid = np.linspace(lo, hi, ABSCISSA_GRID + 2)[1:-1]
        score = np.full(grid.size, np.inf)
        with np.errstate(all="ignore"):
            for n, c in enumerate(grid):
                try:
                    score[n] = math.log(abs(complex(self.values(c, np.zeros(1))[0]))) - c * logx
                except (ArithmeticError, ValueError):
                    pass
        score[~np.isfinite(score)] = np.inf
        if not np.isfinite(score).any():
            return min(max(0.5 * (a + b), lo), hi)
        return float(grid[int(np.argmin(score))])

    def values(self, c: float, y: np.ndarray) -> np.ndarray:
        s = c + 1j * np.asarray(y, dtype=float)
        if self.route in ("call", "put"):
            mom = _row_moment(self.model, self.i, self.T, s + 1)
            if self.p0:
                mom = mom - self.p0 * np.exp((s + 1) * self.x0)
            return self.disc * mom / (s * (s + 1))
        mom = _row_moment(self.model, self.i, self.T, -s)
        if self.p0:
            mom = mom - self.p0 * np.exp(-s * self.x0)
        return self.disc * self.payoff.mellin_transform(s) * mom

    def atom_price(self, x) -> np.ndarray:
        """Exact contribution of the atom at strike (strike route) or spot (spot route) x."""
        x = np.asarray(x, dtype=float)
        if not self.p0:
            return np.zeros_like(x)
        e = math.exp(self.x0)
        if self.route == "call":
            return self.disc * self.p0 * np.maximum(e - x, 0.0)
        if self.route == "put":
            return self.disc * self.p0 * np.maximum(x - e, 0.0)
        return self.disc * self.p0 * self.payoff.evaluate(x * e)


def _choose_U(f: _Integrand, c: float) -> tuple[float, float]:
    """Double U until |integrand| near U is below PEAK_RATIO times its peak."""
    probe0 = np.abs(f.values(c, np.linspace(0.0, U_START, 65)))
    peak = float(probe0.max())
    if peak < 1e-14:  # nothing left after the atom: rounding noise only
        return U_START, 0.0
    U = U_START
    while True:
        tail = float(np.abs(f.values(c, np.linspace(0.75 * U, U, 17))).max())
        if tail < PEAK_RATIO * peak or U >= U_CAP:
            return U, peak
        U *= 2


def select_contour(model: MapModel, T: float, payoff: PayoffSpec, alpha=0,
                   tol: float = 1e-10, strikes: Sequence[float] | None = None) -> ContourSpec:
    """Abscissa, truncation and step for inverting ``payoff`` prices.

    For calls and puts the contour lives in the strike-transform variable;
    ``strikes`` (default: the payoff's strike) are the points used to judge
    convergence of the step halving.
    """
    route = payoff.kind if payoff.kind in ("call", "put") else "spot"
    f = _Integrand(model, alpha, T, route, payoff)
    spec, _ = _refine(f, strikes if strikes is not None else [payoff.strike], tol)
    return spec


@dataclass
class _Inversion:
    spec: ContourSpec
    y: np.ndarray
    vals: np.ndarray
    error_disc: np.ndarray
    peak: float


def _trap(vals: np.ndarray, y: np.ndarray, c: float, logx: np.ndarray, h: float) -> np.ndarray:
    """(1/pi) trapezoid of Re[x^{-(c+iy)} vals] for each log-point, chunked over points."""
    w = np.full(y.size, h)
    w[0] = w[-1] = 0.5 * h
    wr, wi = w * vals.real, w * vals.imag
    out = np.empty(logx.size)
    step = max(1, 4_000_000 // max(y.size, 1))
    for a in range(0, logx.size, step):
        ph = np.outer(logx[a:a + step], y)
        # Re[e^{-i L y} v] = cos(L y) Re v + sin(L y) Im v
        out[a:a + step] = np.cos(ph) @ wr + np.sin(ph) @ wi
    return np.exp(-c * logx) * out / math.pi


def _refine(f: _Integrand, points, tol: float):
    a, b = f.interval()
    logx = np.log(np.asarray(points, dtype=float))
    c = f.abscissa(float(np.mean(logx)))
    U, peak = _choose_U(f, c)
    n = INITIAL_NODES
    y = np.linspace(0.0, U, n + 1)
    vals = f.values(c, y)
    prev = _trap(vals, y, c, logx, U / n)
    while True:
        mid = y[:-1] + 0.5 * (U / n)
        mvals = f.values(c, mid)
        ny = np.empty(2 * n + 1)
        nv = np.empty(2 * n + 1, dtype=complex)
        ny[0::2], ny[1::2] = y, mid
        nv[0::2], nv[1::2] = vals, mvals
        y, vals, n = ny, nv, 2 * n
        cur = _trap(vals, y, c, logx, U / n)
        diff = np.abs(cur - prev)
        scale = np.maximum(1.0, np.abs(cur))
        if np.all(diff <= tol * scale) or 2 * n > MAX_NODES:
            break
        prev = cur
    spec = ContourSpec(c, U, U / n, (a, b))
    return spec, _Inversion(spec, y, vals, diff, peak)


def _tail_bound(inv: _Inversion, logx: np.ndarray) -> np.ndarray:
    """Bound on (1/pi) int_U^inf |x^{-c} M| dy from the decay rate near U."""
    y, vals, c = inv.y, inv.vals, inv.spec.c
    U = inv.spec.U
    near = np.abs(vals[y >= 0.9 * U]).max()
    half = np.abs(vals[(y >= 0.45 * U) & (y <= 0.5 * U)]).max()
    if near == 0:
        return np.zeros_like(logx)
    p = math.log2(half / near) if half > near else 1.0
    p = min(max(p, 1.1), 12.0)
    return np.exp(-c * logx) * near * U / (p - 1) / math.pi


def _invert(f: _Integrand, points, tol: float, contour: ContourSpec | None):
    points = np.asarray(points, dtype=float)
    logx = np.log(points)
    if contour is None:
        spec, inv = _refine(f, points, tol)
        err = inv.error_disc
    else:
        spec = contour
        y = spec.nodes
        inv = _Inversion(spec, y, f.values(spec.c, y), np.zeros(points.size), math.nan)
        err = np.zeros(points.size)
    body = _trap(inv.vals, inv.y, spec.c, logx, spec.h)
    # rounding: the sum cancels from sum |x^{-c} v| h / pi down to the price
    mass = np.exp(-spec.c * logx) * spec.h * float(np.abs(inv.vals).sum()) / math.pi
    err = err + _tail_bound(inv, logx) + 1e-15 * np.abs(body) + 64 * np.finfo(float).eps * mass
    return body + f.atom_price(points), err, spec


def _as_estimates(values, errors, spec, scalar, method="mellin"):
    meta = {"c": spec.c, "U": spec.U, "h": spec.h, "interval": spec.interval}
    out = [PriceEstimate(float(v), float(e), method, meta) for v, e in zip(values, errors)]
    return out[0] if scalar else out


def call_curve(model: MapModel, alpha, strikes, T: float, spot: float = 1.0, tol: float = 1e-10,
               contour: ContourSpec | None = None):
    """Call prices on a strike grid: (values, error bounds, contour)."""
    if not spot > 0:
        raise ValueError("spot must be > 0")
    k = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(k <= 0):
        raise ValueError("strikes must be > 0")
    f = _Integrand(model, alpha, T, "call")
    v, e, spec = _invert(f, k / spot, tol, contour)
    return spot * v, spot * e, spec


def put_curve(model: MapModel, alpha, strikes, T: float, spot: float = 1.0, tol: float = 1e-10,
              contour: ContourSpec | None = None):
    if not spot > 0:
        raise ValueError("spot must be > 0")
    k = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(k <= 0):
        raise ValueError("strikes must be > 0")
    f = _Integrand(model, alpha, T, "put")
    v, e, spec = _invert(f, k / spot, tol, contour)
    return spot * v, spot * e, spec


def price_call(model: MapModel, alpha, spot: float, strike, T: float, tol: float = 1e-10,
               contour: ContourSpec | None = None):
    """Call price(s) E[e^{-rT}(y Y_T - k)^+]; a list of estimates when ``strike`` is a sequence."""
    scalar = np.ndim(strike) == 0
    v, e, spec = call_curve(model, alpha, strike, T, spot, tol, contour)
    v = np.maximum(v, 0.0)
    return _as_estimates(v, e, spec, scalar)


def price_put(model: MapModel, alpha, spot: float, strike, T: float, tol: float = 1e-10,
              contour: ContourSpec | None = None):
    scalar = np.ndim(strike) == 0
    v, e, spec = put_curve(model, alpha, strike, T, spot, tol, contour)
    v = np.maximum(v, 0.0)
    return _as_estimates(v, e, spec, scalar)


def price_general(model: MapModel, alpha, spot, T: float, payoff: PayoffSpec, tol: float = 1e-10,
                  contour: ContourSpec | None = None):
    """Price of H(Y_T) by inverting the Mellin transform in spot."""
    scalar = np.ndim(spot) == 0
    y = np.atleast_1d(np.asarray(spot, dtype=float))
    if np.any(y <= 0):
        raise ValueError("spot must be > 0")
    f = _Integrand(model, alpha, T, "spot", payoff)
    v, e, spec = _invert(f, y, tol, contour)
    return _as_estimates(v, e, spec, scalar)


class CallPriceSurface:
    """C(state, spot, t) for one strike, on a contour fixed once per state.

    Keeping the contour fixed across maturities makes the inversion error a
    smooth function of (spot, t), which is what finite differences need.
    Transform values are cached per (state, t).
    """

    def __init__(self, model: MapModel, strike: float, t_ref: float, tol: float = 1e-10):
        self.model, self.strike = model, float(strike)
        self._specs = {}
        for g in range(model.n_states):
            f = _Integrand(model, g, t_ref, "call")
            self._specs[g], _ = _refine(f, [1.0, self.strike], tol)
        self._cache: dict = {}

    def contour(self, state) -> ContourSpec:
        return self._specs[self.model.index(state)]

    def _values(self, g: int, t: float):
        key = (g, float(t))
        if key not in self._cache:
            f = _Integrand(self.model, g, t, "call")
            spec = self._specs[g]
            y = spec.nodes
            self._cache[key] = (f, y, f.values(spec.c, y))
        return self._cache[key]

    def __call__(self, state, spots, t: float) -> np.ndarray:
        g = self.model.index(state)
        spots = np.atleast_1d(np.asarray(spots, dtype=float))
        if t == 0:
            return np.maximum(spots - self.strike, 0.0)
        f, y, vals = self._values(g, t)
        spec = self._specs[g]
        x = self.strike / spots
        body = _trap(vals, y, spec.c, np.log(x), spec.h) + f.atom_price(x)
        return spots * body


# ---------------------------------------------------------------------------
# PIDE residual
# ---------------------------------------------------------------------------

def pide_residual(model: MapModel, alpha, y: float, t: float, price_grid, dy: float = 1e-3,
                  dt: float = 1e-3, max_spacing: float = 0.05, kinks: Sequence[float] = (),
                  quad_tol: float = 1e-12) -> float:
    """Left-hand side of the pricing PIDE at (y, t), t = time to maturity.

    ``price_grid(state_index, spots, t)`` returns C(state, spots, t). The
    operator is

        -r C - dC/dt + (a + sigma^2/2) y C_y + sigma^2/2 y^2 C_yy
        + sum_jumps rate E[C(a, y e^U) - C(a, y)]
        + sum_g q_ag E[C(g, y e^U_ag) - C(a, y)],

    derivatives by central differences (one-sided when t - dt < 0) and the
    jump expectations by adaptive Gauss-Legendre against each law, split at
    ``kinks`` (spot values where C is not smooth).
    """
    if dy > max_spacing or dt > max_spacing:
        raise GridTooCoarse(f"stencil spacing (dy={dy}, dt={dt}) exceeds {max_spacing}")
    if not (y > 0 and t > 0):
        raise ValueError("y and t must be positive")
    i = model.index(alpha)
    comp = model.levy[i]

    def C(state, spots, tt):
        return np.asarray(price_grid(state, np.asarray(spots, dtype=float), tt), dtype=float)

    c0 = float(C(i, [y], t)[0])
    if t - dt > 0:
        ct = float((C(i, [y], t + dt)[0] - C(i, [y], t - dt)[0]) / (2 * dt))
    else:
        ct = float((-3 * c0 + 4 * C(i, [y], t + dt)[0] - C(i, [y], t + 2 * dt)[0]) / (2 * dt))
    out = -model.r * c0 - ct
    drift = comp.a + 0.5 * comp.sigma ** 2
    if drift != 0 or comp.sigma > 0:
        cm, cp = C(i, [y - dy, y + dy], t)
        out += drift * y * (cp - cm) / (2 * dy)
        if comp.sigma > 0:
            out += 0.5 * comp.sigma ** 2 * y * y * (cp - 2 * c0 + cm) / dy ** 2
    logk = [math.log(k / y) for k in kinks if k > 0]
    for rate, law in comp.jumps:
        out += rate * (law.integrate(lambda u: C(i, y * np.exp(u), t), breaks=logk, tol=quad_tol) - c0)
    for _, j, rate, law in model.active_transitions_from(i):
        out += rate * (law.integrate(lambda u, j=j: C(j, y * np.exp(u), t), breaks=logk, tol=quad_tol) - c0)
    return float(out)
