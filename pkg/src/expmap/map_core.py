"""Analytic fingerprints of a MAP: psi, G, F(z), exp(tF(z)), kappa and the Cramér number."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NonFinite, StripViolation, WrongStateCount
from .laws import (STRIP_MARGIN, Degenerate, ExponentialNeg, ExponentialPos, JumpLaw, Normal,
                   TwoSidedExponential, intersect_strips, strip_contains)
from .model import LevyComponent, MapModel, model_from_json

__all__ = [
    "JumpLaw", "ExponentialPos", "ExponentialNeg", "Normal", "TwoSidedExponential", "Degenerate",
    "LevyComponent", "MapModel", "model_from_json", "intersect_strips", "strip_contains",
    "laplace_exponent", "transition_mgf", "matrix_exponent", "transform_matrix",
    "transform_matrix_2state", "eigen2", "principal_eigenvalue", "kappa_derivative",
    "CramerResult", "cramer_number",
]


def laplace_exponent(model: MapModel, alpha, z):
    """psi_alpha(z) = a z + sigma^2 z^2 / 2 + sum rate * (mgf(z) - 1)."""
    i = model.index(alpha)
    return model.levy[i].laplace_exponent(z, where=f"state '{model.states[i]}'")


def transition_mgf(model: MapModel, alpha, beta, z):
    i, j = model.index(alpha), model.index(beta)
    if i == j:
        raise ValueError("transition_mgf needs two distinct states")
    return model.jump_law(i, j).mgf(z, where=f"transition '{model.states[i]}->{model.states[j]}'")


def matrix_exponent(model: MapModel, z) -> np.ndarray:
    """F(z), shape (d, d) for scalar z or (..., d, d) for an array of z."""
    z = np.asarray(z)
    d = model.n_states
    dtype = complex if np.iscomplexobj(z) else float
    F = np.zeros(z.shape + (d, d), dtype=dtype)
    for i in range(d):
        F[..., i, i] = laplace_exponent(model, i, z) + model.q[i, i]
    for i, j, rate, law in model.active_transitions():
        F[..., i, j] = rate * law.mgf(z, where=f"transition '{model.states[i]}->{model.states[j]}'")
    return F


def _check_finite(E: np.ndarray, F: np.ndarray, t: float) -> np.ndarray:
    if not np.all(np.isfinite(E)):
        with np.errstate(all="ignore"):
            scale = t * float(np.nanmax(np.abs(np.linalg.eigvals(F))))
        raise NonFinite(scale)
    return E


def _expm(F: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        return scipy.linalg.expm(F)


def transform_matrix(model: MapModel, t: float, z, method: str = "auto") -> np.ndarray:
    """E[e^{z xi_t}; J_t = beta | J_0 = alpha] as the matrix exp(t F(z)).

    ``method`` is "expm" (Padé scaling and squaring), "closed" (2-state
    hyperbolic form) or "auto" (closed form whenever there are two states).
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    z = np.asarray(z)
    F = matrix_exponent(model, z)
    if t == 0:
        return np.broadcast_to(np.eye(model.n_states, dtype=F.dtype), F.shape).copy()
    if method == "closed" or (method == "auto" and model.n_states == 2):
        if model.n_states != 2:
            raise WrongStateCount("closed form needs exactly two states")
        E = _closed_from_F(F, t)
    elif method in ("auto", "expm"):
        if model.n_states == 1:
            with np.errstate(all="ignore"):
                E = np.exp(t * F)
        else:
            E = _expm(t * F)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _check_finite(E, F, t)


def _closed_from_F(F: np.ndarray, t: float) -> np.ndarray:
    A, B, C, D = F[..., 0, 0], F[..., 0, 1], F[..., 1, 0], F[..., 1, 1]
    A, B, C, D = (np.asarray(x, dtype=complex) for x in (A, B, C, D))
    delta = np.sqrt((A - D) ** 2 + 4 * B * C)
    alpha = 0.5 * (A + D + delta)
    with np.errstate(all="ignore"):
        lead = np.exp(t * alpha)
        # cosh and sinh/Delta factored through the dominant eigenvalue
        ch = 0.5 * lead * (1.0 + np.exp(-t * delta))
        small = np.abs(delta) == 0
        safe = np.where(small, 1.0, delta)
        sh = np.where(small, 0.5 * t, -np.expm1(-t * delta) / (2.0 * safe)) * lead
        E = np.empty(F.shape, dtype=complex)
        E[..., 0, 0] = ch + sh * (A - D)
        E[..., 1, 1] = ch + sh * (D - A)
        E[..., 0, 1] = 2.0 * sh * B
        E[..., 1, 0] = 2.0 * sh * C
    if not np.iscomplexobj(F):
        E = E.real
    return E


def transform_matrix_2state(model: MapModel, t: float, z) -> np.ndarray:
    """Closed hyperbolic form of exp(tF(z)) for two-state models."""
    return transform_matrix(model, t, z, method="closed")


def _track_branch(delta: np.ndarray) -> np.ndarray:
    """Flip signs along a 1-d contour so Delta varies continuously."""
    out = delta.copy()
    for k in range(1, out.size):
        if abs(out[k] + out[k - 1]) < abs(out[k] - out[k - 1]):
            out[k] = -out[k]
    return out


def eigen2(model: MapModel, z):
    """(alpha(z), beta(z), Delta(z)) for a two-state model.

    Delta takes the root with non-negative real part; along a 1-d array of
    complex z the branch is instead tracked for continuity from the first node.
    """
    if model.n_states != 2:
        raise WrongStateCount(f"eigen2 needs two states, model has {model.n_states}")
    z = np.asarray(z)
    F = matrix_exponent(model, z)
    A, B, C, D = F[..., 0, 0], F[..., 0, 1], F[..., 1, 0], F[..., 1, 1]
    disc = (A - D) ** 2 + 4 * B * C
    if np.iscomplexobj(z):
        delta = np.sqrt(disc.astype(complex))
        if delta.ndim == 1 and delta.size > 1:
            delta = _track_branch(delta)
    else:
        delta = np.sqrt(np.maximum(disc, 0.0))
    psi = A + D
    return 0.5 * (psi + delta), 0.5 * (psi - delta), delta


def principal_eigenvalue(model: MapModel, z):
    """kappa(z): largest eigenvalue of the Metzler matrix F(z) for real z."""
    z = np.asarray(z, dtype=float)
    if model.n_states == 1:
        return np.real(laplace_exponent(model, 0, z)) + 0.0
    if model.n_states == 2:
        return eigen2(model, z)[0]
    F = matrix_exponent(model, z)
    ev = np.linalg.eigvals(F)
    out = ev.real.max(axis=-1)
    return out if out.ndim else float(out)


def kappa_derivative(model: MapModel, z: float = 0.0, h: float = 1e-5) -> float:
    """Central finite difference of kappa."""
    return float((principal_eigenvalue(model, z + h) - principal_eigenvalue(model, z - h)) / (2 * h))


@dataclass(frozen=True)
class CramerResult:
    """Extended Cramér number.

    status is "root" (0 < theta < inf), "zero" (kappa > 0 on z > 0),
    "infinite" (kappa < 0 on z > 0) or "strip_bounded" (kappa < 0 up to a
    finite strip edge, theta undetermined and reported as nan).
    """

    theta: float
    status: str
    diagnostic: str

    @property
    def determined(self) -> bool:
        return self.status != "strip_bounded"


def cramer_number(model: MapModel, z_start: float = 1e-3, tol: float = 1e-10,
                  z_max: float = 1e6) -> CramerResult:
    hi_edge = model.strip[1] - 2 * STRIP_MARGIN

    def kappa(z):
        return float(principal_eigenvalue(model, z))

    z = min(z_start, 0.5 * hi_edge)
    k0 = kappa(z)
    if k0 > 0:
        return CramerResult(0.0, "zero", f"kappa({z:.3g}) = {k0:.3g} > 0")
    if k0 == 0:
        return CramerResult(math.inf, "infinite", "kappa vanishes identically near 0")
    lo = z
    while True:
        nxt = 2 * lo
        at_edge = nxt >= hi_edge
        if at_edge:
            nxt = hi_edge
        if nxt > z_max:
            return CramerResult(math.inf, "infinite", f"kappa < 0 on (0, {z_max:g}]")
        kn = kappa(nxt)
        if kn >= 0:
            hi = nxt
            break
        if at_edge:
            return CramerResult(math.nan, "strip_bounded",
                                f"kappa < 0 up to the strip edge {model.strip[1]:g}")
        lo = nxt
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if kappa(mid) < 0:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    return CramerResult(theta, "root", f"kappa changes sign in [{lo:.12g}, {hi:.12g}]")
