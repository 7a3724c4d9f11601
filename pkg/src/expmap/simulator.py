"""Exact event-driven Monte Carlo for MAP models.

Paths are built from competing exponential clocks: in regime i the next
event (a switch to j at rate q_ij or a Lévy jump of stream k at its
intensity) arrives after an Exp(q_i + sum of jump intensities) time, and
between events xi moves by drift plus Brownian motion. Jump-free, Brownian-free
pieces are integrated exactly for the Asian payoff; Brownian pieces use a
trapezoid grid.

Randomness comes from Philox generators keyed by (seed, purpose, start
state, block index) with a fixed block size, so results do not depend on
how many worker threads process the blocks.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import exprel

from .estimates import PriceEstimate
from .model import MapModel

BLOCK = 8192

_PURPOSE = {"terminal": 1, "transform": 2, "european": 3, "asian": 4, "tail": 5, "counts": 6,
            "expectation": 7}


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 100_000
    seed: int = 20240601
    n_workers: int = 1
    asian_grid: int = 64
    asian_window_start: float = 0.0

    def __post_init__(self):
        if self.n_paths < 1 or self.n_workers < 1 or self.asian_grid < 1:
            raise ValueError("n_paths, n_workers and asian_grid must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        if self.asian_window_start < 0:
            raise ValueError("asian_window_start must be >= 0")


def block_generator(seed: int, purpose: int, state: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(purpose, state, block))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(stream) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(stream)))


def stationary_distribution(model: MapModel) -> np.ndarray:
    d = model.n_states
    A = np.vstack([model.q.T, np.ones(d)])
    b = np.zeros(d + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


# ---------------------------------------------------------------------------
# Event tables
# ---------------------------------------------------------------------------

@dataclass
class _StateEvents:
    total_rate: float
    cum: np.ndarray                 # cumulative probabilities of the event types
    kinds: list                     # ("switch", j, law) or ("jump", law)


def _event_tables(model: MapModel) -> list[_StateEvents]:
    out = []
    for i, comp in enumerate(model.levy):
        rates, kinds = [], []
        for _, j, rate, law in model.active_transitions_from(i):
            rates.append(rate)
            kinds.append(("switch", j, law))
        for rate, law in comp.jumps:
            rates.append(rate)
            kinds.append(("jump", None, law))
        total = float(sum(rates))
        cum = np.cumsum(rates) / total if total > 0 else np.zeros(0)
        if cum.size:
            cum[-1] = 1.0
        out.append(_StateEvents(total, cum, kinds))
    return out


# ---------------------------------------------------------------------------
# Block engine
# ---------------------------------------------------------------------------

@dataclass
class SimResult:
    J: np.ndarray
    xi: np.ndarray
    integral: np.ndarray | None = None
    integral_coarse: np.ndarray | None = None
    sup: np.ndarray | None = None
    inf: np.ndarray | None = None
    n_switches: np.ndarray | None = None

    @staticmethod
    def concat(parts: list["SimResult"]) -> "SimResult":
        def cat(name):
            vals = [getattr(p, name) for p in parts]
            return None if vals[0] is None else np.concatenate(vals)
        return SimResult(*(cat(n) for n in ("J", "xi", "integral", "integral_coarse", "sup", "inf", "n_switches")))


def _window_integral_linear(x0, a, t0, dt, w0):
    """int over [max(t0, w0), t0 + dt] of exp(x0 + a (s - t0)) ds."""
    lo = np.maximum(t0, w0)
    length = np.maximum(t0 + dt - lo, 0.0)
    start = x0 + a * (lo - t0)
    return np.exp(start) * length * exprel(a * length)


def _brownian_pieces(rng, x0, a, s, t0, dt, n_sub, w0):
    """Grid path on [t0, t0 + dt] with 2*n_sub steps; fine/coarse trapezoids, end point and extremes."""
    m = x0.size
    n2 = 2 * n_sub
    frac = np.arange(1, n2 + 1) / n2
    dW = rng.standard_normal((m, n2)) * np.sqrt(dt / n2)[:, None]
    path = np.empty((m, n2 + 1))
    path[:, 0] = x0
    path[:, 1:] = x0[:, None] + a[:, None] * dt[:, None] * frac[None, :] + s[:, None] * np.cumsum(dW, axis=1)
    ey = np.exp(path)
    times = t0[:, None] + dt[:, None] * np.concatenate([[0.0], frac])[None, :]

    def trap(stride):
        tt = times[:, ::stride]
        yy = ey[:, ::stride]
        lo = np.maximum(tt[:, :-1], w0)
        width = np.clip(tt[:, 1:] - lo, 0.0, None)
        return (0.5 * (yy[:, :-1] + yy[:, 1:]) * width).sum(axis=1)

    return path[:, -1], trap(1), trap(2), path.max(axis=1), path.min(axis=1)


def _run_block(model: MapModel, J0: np.ndarray, T: float, rng: np.random.Generator,
               integral: bool, extrema: bool, asian_grid: int, w0: float) -> SimResult:
    tables = _event_tables(model)
    R = np.array([tb.total_rate for tb in tables])
    A = np.array([c.a for c in model.levy])
    S = np.array([c.sigma for c in model.levy])
    n = J0.size
    J = J0.astype(np.int64).copy()
    xi = np.zeros(n)
    t = np.zeros(n)
    nsw = np.zeros(n, dtype=np.int64)
    integ = np.zeros(n) if integral else None
    integ_c = np.zeros(n) if integral else None
    smax = np.zeros(n) if extrema else None
    smin = np.zeros(n) if extrema else None
    active = np.arange(n)
    with np.errstate(divide="ignore"):
        inv_rate = np.where(R > 0, 1.0 / R, np.inf)
    while active.size:
        Ja = J[active]
        tau = rng.standard_exponential(active.size) * inv_rate[Ja]
        remaining = T - t[active]
        dt = np.minimum(tau, remaining)
        x0 = xi[active]
        a, s = A[Ja], S[Ja]
        brown = s > 0
        x1 = x0 + a * dt
        if integral:
            lin = _window_integral_linear(x0, a, t[active], dt, w0)
            integ[active] += np.where(brown, 0.0, lin)
            integ_c[active] += np.where(brown, 0.0, lin)
        if extrema:
            # linear pieces attain their extremes at the end points
            lin_idx = active[~brown]
            smax[lin_idx] = np.maximum(smax[lin_idx], np.maximum(x0, x1)[~brown])
            smin[lin_idx] = np.minimum(smin[lin_idx], np.minimum(x0, x1)[~brown])
        if np.any(brown):
            b = np.nonzero(brown)[0]
            if integral or extrema:
                end, fine, coarse, hi, lo = _brownian_pieces(
                    rng, x0[b], a[b], s[b], t[active[b]], dt[b], asian_grid, w0)
                x1[b] = end
                if integral:
                    integ[active[b]] += fine
                    integ_c[active[b]] += coarse
                if extrema:
                    smax[active[b]] = np.maximum(smax[active[b]], hi)
                    smin[active[b]] = np.minimum(smin[active[b]], lo)
            else:
                x1[b] = x0[b] + a[b] * dt[b] + s[b] * np.sqrt(dt[b]) * rng.standard_normal(b.size)
        xi[active] = x1
        t[active] += dt
        happened = tau < remaining
        active = active[happened]
        if not active.size:
            break
        Ja = J[active]
        u = rng.random(active.size)
        for i, tb in enumerate(tables):
            sel = np.nonzero(Ja == i)[0]
            if not sel.size:
                continue
            kind_idx = np.searchsorted(tb.cum, u[sel], side="right")
            kind_idx = np.minimum(kind_idx, len(tb.kinds) - 1)
            for k, (kind, j, law) in enumerate(tb.kinds):
                hit = active[sel[kind_idx == k]]
                if not hit.size:
                    continue
                xi[hit] += law.sample(rng, hit.size)
                if kind == "switch":
                    J[hit] = j
                    nsw[hit] += 1
        if extrema:
            smax[active] = np.maximum(smax[active], xi[active])
            smin[active] = np.minimum(smin[active], xi[active])
    return SimResult(J, xi, integ, integ_c, smax, smin, nsw)


def _start_states(model: MapModel, alpha0, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(alpha0, str) and alpha0 == "stationary":
        pi = stationary_distribution(model)
        return np.minimum(np.searchsorted(np.cumsum(pi), rng.random(n), side="right"), model.n_states - 1)
    return np.full(n, model.index(alpha0), dtype=np.int64)


def simulate(model: MapModel, alpha0, T: float, cfg: McConfig, purpose: str = "terminal",
             integral: bool = False, extrema: bool = False) -> SimResult:
    """Simulate cfg.n_paths paths to horizon T; results are independent of cfg.n_workers."""
    if not T > 0:
        raise ValueError("horizon must be > 0")
    tag = _PURPOSE.get(purpose, 0)
    state_key = model.n_states if (isinstance(alpha0, str) and alpha0 == "stationary") else model.index(alpha0)
    sizes = [min(BLOCK, cfg.n_paths - s) for s in range(0, cfg.n_paths, BLOCK)]

    def work(b: int) -> SimResult:
        rng = block_generator(cfg.seed, tag, state_key, b)
        J0 = _start_states(model, alpha0, sizes[b], rng)
        return _run_block(model, J0, T, rng, integral, extrema, cfg.asian_grid, cfg.asian_window_start)

    if cfg.n_workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(cfg.n_workers) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(b) for b in range(len(sizes))]
    return SimResult.concat(parts)


# ---------------------------------------------------------------------------
# Single path with full event record
# ---------------------------------------------------------------------------

@dataclass
class PathSample:
    switch_times: np.ndarray
    regimes: np.ndarray              # regime on [switch_times[k], switch_times[k+1])
    xi_at_switches: np.ndarray       # xi right after each switch (first entry: 0 at time 0)
    integral_of_expxi: float
    terminal_state: int
    terminal_xi: float
    trace: list = field(default_factory=list)   # (t, J, xi) at every event and the horizon


def sample_path(model: MapModel, alpha0, T: float, stream=None, asian_grid: int = 64) -> PathSample:
    """One path: exponential holding times, Poisson-many Lévy jumps per interval, switch jumps."""
    if not T > 0:
        raise ValueError("horizon must be > 0")
    rng = as_generator(stream if stream is not None else 0)
    i = model.index(alpha0)
    t, xi, integ = 0.0, 0.0, 0.0
    times, regimes, xs = [0.0], [i], [0.0]
    trace = [(0.0, i, 0.0)]
    while True:
        qi = model.exit_rates[i]
        hold = rng.exponential(1.0 / qi) if qi > 0 else math.inf
        end = min(t + hold, T)
        comp = model.levy[i]
        epochs = []
        for rate, law in comp.jumps:
            cnt = rng.poisson(rate * (end - t))
            for when, size in zip(rng.uniform(t, end, cnt), law.sample(rng, cnt)):
                epochs.append((float(when), float(size)))
        epochs.sort()
        cur = t
        for when, size in epochs + [(end, 0.0)]:
            dt = when - cur
            if dt > 0:
                if comp.sigma > 0:
                    x_end, fine, _, _, _ = _brownian_pieces(
                        rng, np.array([xi]), np.array([comp.a]), np.array([comp.sigma]),
                        np.array([cur]), np.array([dt]), asian_grid, 0.0)
                    integ += float(fine[0])
                    xi = float(x_end[0])
                else:
                    integ += float(_window_integral_linear(np.array([xi]), comp.a, cur, dt, 0.0)[0])
                    xi += comp.a * dt
            cur = when
            if size:
                xi += size
                trace.append((when, i, xi))
        t = end
        if t >= T:
            break
        targets = [(j, rate) for _, j, rate, _ in model.active_transitions_from(i)]
        probs = np.array([r for _, r in targets]) / qi
        j = targets[int(rng.choice(len(targets), p=probs))][0]
        xi += float(model.jump_law(i, j).sample(rng, 1)[0])
        i = j
        times.append(t)
        regimes.append(i)
        xs.append(xi)
        trace.append((t, i, xi))
    trace.append((T, i, xi))
    return PathSample(np.array(times), np.array(regimes), np.array(xs), integ, i, xi, trace)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    m = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return m, se


def mc_joint_transform(model: MapModel, alpha0, z, t: float, cfg: McConfig):
    """Estimate of E_a[e^{z xi_t}; J_t = b] with entrywise standard errors.

    With ``alpha0=None`` every row is simulated and (d, d) arrays are
    returned; otherwise the single row for alpha0. Standard errors of the
    real and imaginary parts are packed as the real and imaginary parts of
    the returned error array.
    """
    rows = range(model.n_states) if alpha0 is None else [model.index(alpha0)]
    d = model.n_states
    est = np.zeros((len(rows), d), dtype=complex)
    err = np.zeros((len(rows), d), dtype=complex)
    for r, i in enumerate(rows):
        res = simulate(model, i, t, cfg, purpose="transform")
        w = np.exp(z * res.xi)
        for b in range(d):
            x = np.where(res.J == b, w, 0.0)
            mr, sr = _mean_se(np.real(x))
            mi, si = _mean_se(np.imag(x)) if np.iscomplexobj(x) else (0.0, 0.0)
            est[r, b] = mr + 1j * mi
            err[r, b] = sr + 1j * si
    if not np.iscomplexobj(np.asarray(z)):
        est, err = est.real, err.real
    return (est, err) if alpha0 is None else (est[0], err[0])


def mc_expectation(model: MapModel, alpha0, T: float, fn: Callable[[np.ndarray], np.ndarray],
                   cfg: McConfig) -> tuple[float, float]:
    """(mean, stderr) of fn(Y_T) with Y_0 = 1, undiscounted."""
    res = simulate(model, alpha0, T, cfg, purpose="expectation")
    return _mean_se(np.asarray(fn(np.exp(res.xi)), dtype=float))


def mc_european(model: MapModel, alpha0, spot: float, payoff, T: float, cfg: McConfig) -> PriceEstimate:
    """Discounted MC price of payoff(spot * Y_T); payoff is a PayoffSpec or a callable."""
    fn = payoff.evaluate if hasattr(payoff, "evaluate") else payoff
    res = simulate(model, alpha0, T, cfg, purpose="european")
    disc = math.exp(-model.r * T)
    m, se = _mean_se(disc * np.asarray(fn(spot * np.exp(res.xi)), dtype=float))
    return PriceEstimate(m, se, "mc", {"n_paths": cfg.n_paths, "seed": cfg.seed})


def mc_european_curve(model: MapModel, alpha0, spot: float, strikes, T: float, cfg: McConfig,
                      kind: str = "call") -> tuple[np.ndarray, np.ndarray]:
    """Call (or put) prices on a strike grid from one set of paths."""
    res = simulate(model, alpha0, T, cfg, purpose="european")
    y = spot * np.exp(res.xi)
    disc = math.exp(-model.r * T)
    vals, errs = [], []
    for k in np.atleast_1d(strikes):
        pay = np.maximum(y - k, 0.0) if kind == "call" else np.maximum(k - y, 0.0)
        m, se = _mean_se(disc * pay)
        vals.append(m)
        errs.append(se)
    return np.array(vals), np.array(errs)


def mc_asian(model: MapModel, alpha0, spot: float, strike, T: float, cfg: McConfig,
             averaging: str = "mean"):
    """Discounted MC price of (A - k)^+ with A the time average (or raw integral) of spot * Y.

    The integral runs over [cfg.asian_window_start, T]. ``error`` is the
    standard error plus, when some regime has a Brownian part, the change
    between the asian_grid and 2*asian_grid trapezoid estimates.
    Returns one estimate, or a list when ``strike`` is a sequence.
    """
    if averaging not in ("mean", "raw"):
        raise ValueError("averaging must be 'mean' or 'raw'")
    w0 = cfg.asian_window_start
    if not T > w0:
        raise ValueError("horizon must exceed the averaging window start")
    res = simulate(model, alpha0, T, cfg, purpose="asian", integral=True)
    scale = spot / (T - w0) if averaging == "mean" else spot
    disc = math.exp(-model.r * T)
    brownian = any(c.sigma > 0 for c in model.levy)
    out = []
    for k in np.atleast_1d(strike):
        # coarse grid = asian_grid steps, fine = 2 * asian_grid
        coarse = disc * np.maximum(scale * res.integral_coarse - k, 0.0)
        m, se = _mean_se(coarse)
        bias = 0.0
        if brownian:
            fine = disc * np.maximum(scale * res.integral - k, 0.0)
            bias = abs(float(np.mean(fine)) - m)
        out.append(PriceEstimate(m, se + bias, "mc", {"stderr": se, "grid_delta": bias,
                                                      "n_paths": cfg.n_paths}))
    return out[0] if np.ndim(strike) == 0 else out


def coupled_counts(model: MapModel, alpha0, T: float, stream=None, n_paths: int | None = None):
    """Switch count N_T and a dominating Poisson count eta_T driven by the same uniforms.

    Holding times are -log(X_i)/q_{J_i} and the Poisson inter-arrival times
    are -log(X_i)/lam with lam = max q_a; since q_{J_i} <= lam every partial
    sum of the former dominates the latter, hence N_T <= eta_T pathwise.
    Returns integers for a single path, arrays when ``n_paths`` is given.
    """
    rng = as_generator(stream if stream is not None else 0)
    m = 1 if n_paths is None else int(n_paths)
    qv = model.exit_rates
    lam = float(qv.max())
    J = np.full(m, model.index(alpha0), dtype=np.int64)
    t_switch = np.zeros(m)
    t_pois = np.zeros(m)
    N = np.zeros(m, dtype=np.int64)
    eta = np.zeros(m, dtype=np.int64)
    active = np.arange(m) if lam > 0 and T > 0 else np.arange(0)
    # embedded-chain transition probabilities
    P = np.zeros_like(model.q)
    for i in range(model.n_states):
        if qv[i] > 0:
            P[i] = np.where(np.arange(model.n_states) == i, 0.0, model.q[i] / qv[i])
    cumP = np.cumsum(P, axis=1)
    while active.size:
        E = -np.log(rng.random(active.size))
        Ja = J[active]
        with np.errstate(divide="ignore"):
            hold = np.where(qv[Ja] > 0, E / np.where(qv[Ja] > 0, qv[Ja], 1.0), np.inf)
        t_switch[active] += hold
        t_pois[active] += E / lam
        N[active] += t_switch[active] <= T
        eta[active] += t_pois[active] <= T
        u = rng.random(active.size)
        nxt = (u[:, None] >= cumP[Ja]).sum(axis=1)
        J[active] = np.minimum(nxt, model.n_states - 1)
        active = active[t_pois[active] <= T]
    if n_paths is None:
        return int(N[0]), int(eta[0])
    return N, eta


@dataclass(frozen=True)
class TailCheck:
    lhs_est: float
    rhs_est: float
    margin: float
    ci: float            # three combined standard errors of the margin

    def __iter__(self):
        return iter((self.lhs_est, self.rhs_est, self.margin))


def sup_tail_check(model: MapModel, alpha0, T: float, u: float, u0: float, cfg: McConfig) -> TailCheck:
    """MC estimates of P(sup xi >= u) and P(xi_T > u - u0) / min_a P_a(inf xi >= -u0)."""
    if not 0 < u0 < u:
        raise ValueError("need 0 < u0 < u")
    res = simulate(model, alpha0, T, cfg, purpose="tail", extrema=True)
    lhs, se_l = _mean_se((res.sup >= u).astype(float))
    num, se_n = _mean_se((res.xi > u - u0).astype(float))
    dens = []
    for i in range(model.n_states):
        ri = simulate(model, i, T, cfg, purpose="tail", extrema=True)
        dens.append(_mean_se((ri.inf >= -u0).astype(float)))
    den, se_d = min(dens, key=lambda x: x[0])
    rhs = num / den if den > 0 else math.inf
    se_r = rhs * math.sqrt((se_n / num) ** 2 + (se_d / den) ** 2) if num > 0 and den > 0 else 0.0
    margin = rhs - lhs
    return TailCheck(lhs, rhs, margin, 3 * math.hypot(se_l, se_r))
