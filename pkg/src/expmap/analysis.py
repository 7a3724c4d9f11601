"""Integrability, uniform integrability and (sub/super)martingale classification of Y = e^xi."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NotIntegrable
from .laws import strip_contains
from .map_core import CramerResult, cramer_number, matrix_exponent
from .model import MapModel


@dataclass(frozen=True)
class IntegrabilityReport:
    p: float
    integrable: bool
    witness: str
    uniformly_integrable: str      # "yes" | "no" | "unknown"
    theta: float
    theta_status: str

    def to_json(self) -> dict:
        out = asdict(self)
        out["theta"] = _json_float(self.theta)
        return out


@dataclass(frozen=True)
class MartingaleReport:
    generator_values: dict
    classification: str            # martingale | submartingale | supermartingale | neither
    finite: bool
    witness: str = ""

    def to_json(self) -> dict:
        return {
            "generator_values": {k: _json_float(v) for k, v in self.generator_values.items()},
            "classification": self.classification,
            "finite": self.finite,
            "witness": self.witness,
        }


def _json_float(x: float):
    if x is None or math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _first_failure(model: MapModel, p: float) -> str | None:
    for name, strip in model.component_strips():
        if not strip_contains(strip, p):
            return f"{name}: strip ({strip[0]:g}, {strip[1]:g})"
    return None


def check_integrability(model: MapModel, p: float, cramer: CramerResult | None = None) -> IntegrabilityReport:
    """Is E[Y_t^p] finite for all t, and is (Y_t^p) uniformly integrable?"""
    if not p > 0:
        raise ValueError("p must be > 0")
    fail = _first_failure(model, p)
    cr = cramer if cramer is not None else cramer_number(model)
    if fail is not None:
        return IntegrabilityReport(p, False, fail, "no", cr.theta, cr.status)
    if not cr.determined:
        ui = "unknown"
    else:
        ui = "yes" if cr.theta > p else "no"
    return IntegrabilityReport(p, True, "F(p) exists", ui, cr.theta, cr.status)


def generator_values(model: MapModel) -> np.ndarray:
    """A_a = sum_b F(1)[a, b], the growth rate of E_a[Y_t] at t = 0."""
    fail = _first_failure(model, 1.0)
    if fail is not None:
        raise NotIntegrable(fail)
    return matrix_exponent(model, 1.0).sum(axis=1)


def martingale_class(model: MapModel, tol: float = 1e-10) -> MartingaleReport:
    try:
        A = generator_values(model)
    except NotIntegrable as exc:
        return MartingaleReport({s: math.nan for s in model.states}, "neither", False, exc.witness)
    if np.all(np.abs(A) <= tol):
        cls = "martingale"
    elif np.all(A >= -tol):
        cls = "submartingale"
    elif np.all(A <= tol):
        cls = "supermartingale"
    else:
        cls = "neither"
    return MartingaleReport({s: float(a) for s, a in zip(model.states, A)}, cls, True, "F(1) exists")


def drift_correct(model: MapModel) -> MapModel:
    """Shift each regime's drift by -A_a so that every generator value vanishes."""
    A = generator_values(model)
    if np.all(A == 0):
        return model
    return model.with_drifts([c.a - x for c, x in zip(model.levy, A)])


def discount_shift(model: MapModel) -> MapModel:
    """Model of e^{-rt} Y_t: every drift lowered by r."""
    return model.shift_drifts(-model.r) if model.r else model


def kappa_grid(model: MapModel, n: int = 41) -> list[tuple[float, float]]:
    """(z, kappa(z)) on a grid over the real part of the strip (clipped to [-5, 5])."""
    from .map_core import principal_eigenvalue

    lo, hi = model.strip
    a, b = max(lo, -5.0), min(hi, 5.0)
    pad = 1e-6 * (b - a)
    zs = np.linspace(a + pad, b - pad, n)
    return [(float(z), float(principal_eigenvalue(model, z))) for z in zs]
