"""Command-line interface: ``expmap <command> [options]``.

Exit codes: 0 ok, 2 invalid input, 3 method inapplicable, 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .analysis import check_integrability, discount_shift, kappa_grid, martingale_class
from .closed_form import (CpExpModel, SkewModel, call_price_series, match_cp_exp, match_skew,
                          skew_call_price)
from .errors import ExpMapError, ModelError, NoValidContour
from .map_core import cramer_number
from .mellin_pricer import CallPriceSurface, call_curve, pide_residual, put_curve
from .model import MapModel
from .shipped import load_shipped, shipped_model_names
from .simulator import McConfig, mc_asian, mc_european_curve, sample_path

EXIT_OK, EXIT_INPUT, EXIT_INAPPLICABLE, EXIT_VERIFY = 0, 2, 3, 4

PRICE_COLUMNS = ["strike", "price", "err_bound", "method"]
EXAMPLE_COLUMNS = PRICE_COLUMNS + ["mc_price", "mc_stderr"]
PLOT_COLUMNS = ["strike", "method", "value", "err"]
TRACE_COLUMNS = ["path", "t", "J", "xi"]
PIDE_COLUMNS = ["y", "t", "spacing", "residual"]


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Input parsing
# ---------------------------------------------------------------------------

def parse_strikes(text: str) -> np.ndarray:
    """'0.5,1,1.5' or 'lo:hi:n' (n evenly spaced points, both ends included)."""
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            out = np.linspace(float(lo), float(hi), n)
        else:
            out = np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError:
        raise CliError(f"cannot parse strikes {text!r}; use 'a,b,c' or 'lo:hi:n'", EXIT_INPUT) from None
    if out.size == 0 or not np.all(np.isfinite(out)) or np.any(out <= 0):
        raise CliError("strikes must be finite and > 0", EXIT_INPUT)
    return out


def parse_floats(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"cannot parse {name} {text!r}", EXIT_INPUT) from None


def load_model(spec: str) -> MapModel:
    """A JSON file path, or the name of a shipped model."""
    path = Path(spec)
    try:
        if path.is_file():
            return MapModel.load(path)
        if spec in shipped_model_names():
            return load_shipped(spec)
    except ModelError as exc:
        raise CliError(f"invalid model: {exc}", EXIT_INPUT) from None
    except (json.JSONDecodeError, OSError) as exc:
        raise CliError(f"cannot read model {spec!r}: {exc}", EXIT_INPUT) from None
    raise CliError(f"model {spec!r} is neither a file nor one of: {', '.join(shipped_model_names())}",
                   EXIT_INPUT)


def resolve_state(model: MapModel, state: str | None):
    if state is None:
        return model.states[0]
    try:
        model.index(state)
    except (KeyError, IndexError, ValueError):
        raise CliError(f"unknown state {state!r}; states are {list(model.states)}", EXIT_INPUT) from None
    return state


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(rows: list[dict], columns: list[str], out: str | None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({c: _fmt(row.get(c, "")) for c in columns})
    text = buf.getvalue()
    _emit(text, out)
    return text


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def plot_rows(rows: list[dict]) -> list[dict]:
    """Long format (strike, method, value, err), including MC verification columns."""
    out = []
    for r in rows:
        out.append({"strike": r["strike"], "method": r["method"], "value": r["price"], "err": r["err_bound"]})
        if r.get("mc_price", "") != "":
            out.append({"strike": r["strike"], "method": "mc", "value": r["mc_price"], "err": r["mc_stderr"]})
    return out


# ---------------------------------------------------------------------------
# Pricing
# ---------------------------------------------------------------------------

def series_rows(model: MapModel, state, spot: float, strikes, T: float) -> list[dict] | None:
    """Closed-form series prices, or None when the model has neither series shape."""
    cp = match_cp_exp(model, T)
    if cp is not None:
        est = [call_price_series(cp, model.index(state), k / spot) for k in strikes]
    else:
        sk = match_skew(model, T)
        if sk is None:
            return None
        est = [skew_call_price(sk, k / spot) for k in strikes]
    return [{"strike": k, "price": spot * e.value, "err_bound": spot * e.error, "method": "series"}
            for k, e in zip(strikes, est)]


def mc_rows(model: MapModel, state, spot, strikes, T, cfg: McConfig, kind="call") -> list[dict]:
    v, e = mc_european_curve(model, state, spot, strikes, T, cfg, kind=kind)
    return [{"strike": k, "price": a, "err_bound": b, "method": "mc"} for k, a, b in zip(strikes, v, e)]


def price_rows(model: MapModel, state, spot: float, strikes, T: float, method: str,
               kind: str = "call", tol: float = 1e-10, cfg: McConfig | None = None) -> list[dict]:
    cfg = cfg or McConfig()
    methods = ["mellin", "series", "mc"] if method == "all" else [method]
    rows: list[dict] = []
    for m in methods:
        if m == "mellin":
            curve = call_curve if kind == "call" else put_curve
            try:
                v, e, _ = curve(model, state, strikes, T, spot, tol)
            except NoValidContour as exc:
                _warn(f"{exc}; falling back to mc")
                if "mc" not in methods:
                    rows += mc_rows(model, state, spot, strikes, T, cfg, kind)
                continue
            rows += [{"strike": k, "price": max(a, 0.0), "err_bound": b, "method": "mellin"}
                     for k, a, b in zip(strikes, v, e)]
        elif m == "series":
            got = series_rows(model, state, spot, strikes, T) if kind == "call" else None
            if got is None:
                msg = "series pricing needs a call on a two-state exponential-jump model of either series shape"
                if method == "series":
                    raise CliError(msg, EXIT_INAPPLICABLE)
                _warn(msg + "; skipped")
                continue
            rows += got
        elif m == "mc":
            rows += mc_rows(model, state, spot, strikes, T, cfg, kind)
        else:
            raise CliError(f"unknown method {m!r}", EXIT_INPUT)
    return rows


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def classify_report(model: MapModel, discounted: bool = False, tol: float = 1e-10) -> dict:
    if discounted:
        model = discount_shift(model)
    cr = cramer_number(model)
    mart = martingale_class(model, tol)
    return {
        "discounted": discounted,
        "integrability": [check_integrability(model, p, cr).to_json() for p in (1.0, 2.0)],
        "martingale": mart.to_json(),
        "theta": _json_num(cr.theta),
        "theta_status": cr.status,
        "kappa_grid": [[z, _json_num(k)] for z, k in kappa_grid(model)],
    }


def _json_num(x: float):
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


# ---------------------------------------------------------------------------
# European versus Asian comparison
# ---------------------------------------------------------------------------

@dataclass
class CompareReport:
    generator_values: dict
    classification: str
    strikes: list
    european: list
    european_err: list
    european_method: str
    asian: list
    asian_stderr: list
    verdicts: list
    crossing_strike: float | None
    assertion: str          # "asian_cheaper_everywhere" | "european_cheaper_below_K" | "none"
    passed: bool

    def to_json(self) -> dict:
        return asdict(self)


def _verdict(eu: float, eu_err: float, asn: float, asn_err: float) -> str:
    noise = 3.0 * math.hypot(eu_err, asn_err)
    if eu - asn > noise:
        return "asian_cheaper"
    if asn - eu > noise:
        return "european_cheaper"
    return "within_noise"


def compare(model: MapModel, state, spot: float, strikes, T: float, cfg: McConfig,
            tol: float = 1e-10, discounted: bool = False) -> CompareReport:
    """European call (Mellin, else MC) against the time-averaged Asian call (MC) on a strike grid."""
    mart = martingale_class(discount_shift(model) if discounted else model, tol)
    strikes = np.sort(np.asarray(strikes, dtype=float))
    try:
        eu, eu_err, _ = call_curve(model, state, strikes, T, spot)
        eu = np.maximum(eu, 0.0)
        method = "mellin"
    except NoValidContour as exc:
        _warn(f"{exc}; european leg priced by mc")
        eu, eu_err = mc_european_curve(model, state, spot, strikes, T, cfg)
        method = "mc"
    asian = mc_asian(model, state, spot, list(strikes), T, cfg)
    av = [a.value for a in asian]
    ae = [a.error for a in asian]
    verdicts = [_verdict(*x) for x in zip(eu, eu_err, av, ae)]
    A = np.array(list(mart.generator_values.values()), dtype=float)
    crossing, assertion, passed = None, "none", True
    if mart.finite and np.all(A > tol):
        assertion = "asian_cheaper_everywhere"
        passed = "european_cheaper" not in verdicts
    elif mart.finite and np.all(A < -tol):
        assertion = "european_cheaper_below_K"
        for k, v in zip(strikes, verdicts):
            if v != "european_cheaper":
                break
            crossing = float(k)
    return CompareReport(
        generator_values=mart.generator_values, classification=mart.classification,
        strikes=[float(k) for k in strikes], european=[float(x) for x in eu],
        european_err=[float(x) for x in eu_err], european_method=method,
        asian=[float(x) for x in av], asian_stderr=[float(x) for x in ae],
        verdicts=verdicts, crossing_strike=crossing, assertion=assertion, passed=passed)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cfg(args) -> McConfig:
    try:
        return McConfig(n_paths=args.paths, seed=args.seed, n_workers=args.workers)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def _maybe_plot(args, rows):
    if args.emit_plot_data:
        write_csv(plot_rows(rows), PLOT_COLUMNS, args.emit_plot_data)


def cmd_price(args) -> int:
    model = load_model(args.model)
    state = resolve_state(model, args.state)
    rows = price_rows(model, state, args.spot, parse_strikes(args.strikes), args.maturity,
                      args.method, args.kind, args.tol, _cfg(args))
    write_csv(rows, PRICE_COLUMNS, args.out)
    _maybe_plot(args, rows)
    return EXIT_OK


def cmd_mc_price(args) -> int:
    args.method = "mc"
    return cmd_price(args)


def cmd_classify(args) -> int:
    model = load_model(args.model)
    text = json.dumps(classify_report(model, args.discounted_check, args.class_tol), indent=2) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    model = load_model(args.model)
    state = resolve_state(model, args.state)
    rep = compare(model, state, args.spot, parse_strikes(args.strikes), args.maturity, _cfg(args),
                  args.class_tol, args.discounted_check)
    _emit(json.dumps(rep.to_json(), indent=2) + "\n", args.out)
    if args.emit_plot_data:
        rows = [{"strike": k, "method": "european", "value": v, "err": e}
                for k, v, e in zip(rep.strikes, rep.european, rep.european_err)]
        rows += [{"strike": k, "method": "asian", "value": v, "err": e}
                 for k, v, e in zip(rep.strikes, rep.asian, rep.asian_stderr)]
        write_csv(rows, PLOT_COLUMNS, args.emit_plot_data)
    if not rep.passed:
        print("verification failure: an Asian price exceeds the European price outside noise "
              "although every generator value is positive", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _example_rows(model, state, spot, strikes, T, series_fn, cfg) -> list[dict]:
    mc_v, mc_e = mc_european_curve(model, state, spot, strikes, T, cfg)
    rows = []
    for k, mv, me in zip(strikes, mc_v, mc_e):
        est = series_fn(k / spot)
        rows.append({"strike": k, "price": spot * est.value, "err_bound": spot * est.error,
                     "method": "series", "mc_price": mv, "mc_stderr": me})
    return rows


def cmd_example31(args) -> int:
    cp = CpExpModel(args.q, args.lam_plus, args.lam_minus, args.maturity, args.rate)
    state = args.state or "+"
    if state not in ("+", "-"):
        raise CliError("state must be '+' or '-'", EXIT_INPUT)
    rows = _example_rows(cp.to_map_model(), state, args.spot, parse_strikes(args.strikes), args.maturity,
                         lambda k: call_price_series(cp, state, k), _cfg(args))
    write_csv(rows, EXAMPLE_COLUMNS, args.out)
    _maybe_plot(args, rows)
    return EXIT_OK


def cmd_example32(args) -> int:
    sk = SkewModel(args.q, args.maturity, args.rate)
    state = args.state or "+"
    if state not in ("+", "-"):
        raise CliError("state must be '+' or '-'", EXIT_INPUT)
    rows = _example_rows(sk.to_map_model(), state, args.spot, parse_strikes(args.strikes), args.maturity,
                         lambda k: skew_call_price(sk, k), _cfg(args))
    write_csv(rows, EXAMPLE_COLUMNS, args.out)
    _maybe_plot(args, rows)
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    state = resolve_state(model, args.state)
    rows = []
    for p in range(args.paths):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed, spawn_key=(p,))))
        path = sample_path(model, state, args.maturity, rng)
        rows += [{"path": p, "t": t, "J": model.states[j], "xi": x} for t, j, x in path.trace]
    write_csv(rows, TRACE_COLUMNS, args.out)
    return EXIT_OK


def cmd_pide_check(args) -> int:
    model = load_model(args.model)
    state = resolve_state(model, args.state)
    K = float(args.strike)
    ys = parse_floats(args.spots, "spots")
    ts = parse_floats(args.times, "times")
    hs = parse_floats(args.spacings, "spacings")
    if not (ys and ts and hs) or min(ys + ts + hs) <= 0:
        raise CliError("spots, times and spacings must be non-empty and positive", EXIT_INPUT)
    try:
        surface = CallPriceSurface(model, K, float(np.median(ts)), args.tol)
    except NoValidContour as exc:
        raise CliError(f"no Mellin price grid for this model: {exc}", EXIT_INAPPLICABLE) from None
    rows = []
    for y in ys:
        for t in ts:
            for h in hs:
                res = pide_residual(model, state, y, t, surface, dy=h, dt=h, kinks=[K])
                rows.append({"y": y, "t": t, "spacing": h, "residual": res})
    write_csv(rows, PIDE_COLUMNS, args.out)
    worst = max(abs(r["residual"]) for r in rows)
    if worst > args.threshold:
        print(f"verification failure: max |residual| {worst:.3g} > {args.threshold:g}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="expmap", description="Option pricing under exponential Markov additive models.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True, strikes="0.5:1.5:5"):
        if model:
            sp.add_argument("--model", required=True, help="model JSON file or shipped model name")
        sp.add_argument("--state", default=None, help="starting regime (default: first state)")
        sp.add_argument("--spot", type=float, default=1.0)
        if strikes is not None:
            sp.add_argument("--strikes", default=strikes, help="'a,b,c' or 'lo:hi:n'")
        sp.add_argument("--maturity", type=float, default=1.0)
        sp.add_argument("--tol", type=float, default=1e-10)
        sp.add_argument("--paths", type=int, default=100_000)
        sp.add_argument("--seed", type=int, default=McConfig.seed)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", default=None, help="write to this file instead of stdout")
        sp.add_argument("--emit-plot-data", default=None, metavar="FILE",
                        help="also write long-format CSV (strike, method, value, err)")

    sp = sub.add_parser("price", help="European prices on a strike grid (CSV)")
    common(sp)
    sp.add_argument("--method", choices=["mellin", "series", "mc", "all"], default="mellin")
    sp.add_argument("--kind", choices=["call", "put"], default="call")
    sp.set_defaults(func=cmd_price)

    sp = sub.add_parser("mc-price", help="Monte Carlo European prices (CSV, method=mc)")
    common(sp)
    sp.add_argument("--kind", choices=["call", "put"], default="call")
    sp.set_defaults(func=cmd_mc_price, method="mc")

    sp = sub.add_parser("classify", help="integrability and martingale report (JSON)")
    sp.add_argument("--model", required=True)
    sp.add_argument("--discounted-check", action="store_true", help="lower every drift by r first")
    sp.add_argument("--class-tol", type=float, default=1e-10)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("compare", help="European versus Asian call ordering (JSON)")
    common(sp)
    sp.add_argument("--discounted-check", action="store_true")
    sp.add_argument("--class-tol", type=float, default=1e-10)
    sp.set_defaults(func=cmd_compare)

    for name, fn, defaults in (("example31", cmd_example31, {"lam_plus": 2.0, "lam_minus": 3.0, "q": 1.0}),
                               ("example32", cmd_example32, {"q": 0.5})):
        sp = sub.add_parser(name, help="closed-form series prices with an MC check (CSV)")
        common(sp, model=False, strikes="0.2:3:10" if name == "example31" else "0.1,0.5,0.9,1,1.5,2")
        sp.add_argument("--q", type=float, default=defaults["q"])
        if "lam_plus" in defaults:
            sp.add_argument("--lam-plus", type=float, default=defaults["lam_plus"])
            sp.add_argument("--lam-minus", type=float, default=defaults["lam_minus"])
        sp.add_argument("--rate", type=float, default=0.0)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("simulate", help="path traces (t, J, xi) as CSV")
    sp.add_argument("--model", required=True)
    sp.add_argument("--state", default=None)
    sp.add_argument("--maturity", type=float, default=1.0)
    sp.add_argument("--paths", type=int, default=1)
    sp.add_argument("--seed", type=int, default=McConfig.seed)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("pide-check", help="PIDE residual of the Mellin call surface (CSV)")
    sp.add_argument("--model", required=True)
    sp.add_argument("--state", default=None)
    sp.add_argument("--strike", type=float, default=1.0)
    sp.add_argument("--spots", default="0.5,1.3,2.0")
    sp.add_argument("--times", default="0.6")
    sp.add_argument("--spacings", default="1e-3")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--threshold", type=float, default=1e-3)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_pide_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ExpMapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
