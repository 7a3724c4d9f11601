"""Adaptive 64-point Gauss-Legendre panels for expectations against jump densities."""
from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(64)


def _panel(g, a: float, b: float) -> float:
    half = 0.5 * (b - a)
    x = a + half * (_NODES + 1.0)
    return float(half * np.dot(_WEIGHTS, g(x)))


def adaptive_gl(g: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                tol: float = 1e-13, depth: int = 0, whole: float | None = None) -> float:
    """Integrate g over [a, b], bisecting until two-panel and one-panel values agree."""
    if b <= a:
        return 0.0
    if whole is None:
        whole = _panel(g, a, b)
    mid = 0.5 * (a + b)
    left, right = _panel(g, a, mid), _panel(g, mid, b)
    if abs(left + right - whole) <= tol * max(1.0, abs(left + right)) or depth >= 30:
        return left + right
    return (adaptive_gl(g, a, mid, tol, depth + 1, left)
            + adaptive_gl(g, mid, b, tol, depth + 1, right))


def integrate_density(f, density, lo: float, hi: float, breaks: Iterable[float] = (),
                      tol: float = 1e-13) -> float:
    """Integral of f(u) * density(u) over [lo, hi], split at interior ``breaks``."""
    cuts = sorted({lo, hi, *[float(b) for b in breaks if lo < b < hi]})

    def g(u):
        return np.asarray(f(u), dtype=float) * density(u)

    return sum(adaptive_gl(g, a, b, tol) for a, b in zip(cuts[:-1], cuts[1:]))
