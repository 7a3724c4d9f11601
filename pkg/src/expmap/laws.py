"""Jump-size laws with closed-form moment generating functions.

Every law knows its MGF strip, can sample itself and can integrate a
function against its distribution (used by the PIDE checker).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, ClassVar, Sequence

import numpy as np

from .errors import ModelError, StripViolation
from .quadrature import integrate_density

STRIP_MARGIN = 1e-9

Strip = tuple[float, float]


def strip_contains(strip: Strip, x, margin: float = STRIP_MARGIN) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(np.all((x > strip[0] + margin) & (x < strip[1] - margin)))


def intersect_strips(strips: Sequence[Strip]) -> Strip:
    lo, hi = -math.inf, math.inf
    for a, b in strips:
        lo, hi = max(lo, a), min(hi, b)
    return lo, hi


class JumpLaw:
    """Base class. Subclasses are frozen dataclasses."""

    kind: ClassVar[str] = ""
    has_atom: ClassVar[bool] = False

    @property
    def strip(self) -> Strip:
        raise NotImplementedError

    def _mgf(self, z):
        raise NotImplementedError

    def mgf(self, z, where: str | None = None):
        """E[exp(z U)], vectorised over ``z``; raises outside the strip."""
        z = np.asarray(z)
        re = np.real(z)
        lo, hi = self.strip
        bad = (re <= lo + STRIP_MARGIN) | (re >= hi - STRIP_MARGIN)
        if np.any(bad):
            worst = float(np.atleast_1d(re)[np.argmax(np.atleast_1d(bad))])
            raise StripViolation(where or self.describe(), worst, self.strip)
        out = self._mgf(z.astype(complex) if np.iscomplexobj(z) else z.astype(float))
        return out

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def expected_value(self) -> float:
        raise NotImplementedError

    def integrate(self, f: Callable[[np.ndarray], np.ndarray], breaks=(), growth: float = 1.0,
                  tol: float = 1e-13) -> float:
        """E[f(U)] by adaptive Gauss-Legendre panels.

        ``growth`` is a signed rate g with |f(u)| = O(e^{g u}); it sets the tail cut
        (positive g matters on the right tail, negative g on the left);
        ``breaks`` are points where f is not smooth (panels split there).
        """
        raise NotImplementedError

    @property
    def params(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": self.params}

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.kind}({inner})"


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ModelError(f"must be a positive finite number, got {value!r}", name)
    return value


def _exp_cut(rate: float, growth: float) -> float:
    # density * e^{growth u} falls below ~1e-18 beyond the cut
    return 42.0 / max(rate - max(growth, 0.0), 0.05 * rate)


@dataclass(frozen=True)
class ExponentialPos(JumpLaw):
    rate: float
    kind: ClassVar[str] = "ExponentialPos"

    def __post_init__(self):
        _positive("rate", self.rate)

    @property
    def strip(self) -> Strip:
        return (-math.inf, self.rate)

    def _mgf(self, z):
        return self.rate / (self.rate - z)

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    def expected_value(self) -> float:
        return 1.0 / self.rate

    def density(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u >= 0, self.rate * np.exp(-self.rate * np.maximum(u, 0.0)), 0.0)

    def integrate(self, f, breaks=(), growth=1.0, tol=1e-13):
        return integrate_density(f, self.density, 0.0, _exp_cut(self.rate, growth), breaks, tol)

    @property
    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class ExponentialNeg(JumpLaw):
    """U = -E with E exponential of the given rate."""

    rate: float
    kind: ClassVar[str] = "ExponentialNeg"

    def __post_init__(self):
        _positive("rate", self.rate)

    @property
    def strip(self) -> Strip:
        return (-self.rate, math.inf)

    def _mgf(self, z):
        return self.rate / (self.rate + z)

    def sample(self, rng, size):
        return -rng.exponential(1.0 / self.rate, size)

    def expected_value(self) -> float:
        return -1.0 / self.rate

    def density(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u <= 0, self.rate * np.exp(self.rate * np.minimum(u, 0.0)), 0.0)

    def integrate(self, f, breaks=(), growth=1.0, tol=1e-13):
        return integrate_density(f, self.density, -_exp_cut(self.rate, -growth), 0.0, breaks, tol)

    @property
    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class Normal(JumpLaw):
    mean: float
    variance: float
    kind: ClassVar[str] = "Normal"

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ModelError("must be finite", "mean")
        if not (self.variance >= 0 and math.isfinite(self.variance)):
            raise ModelError(f"must be >= 0, got {self.variance!r}", "variance")

    @property
    def has_atom(self) -> bool:  # type: ignore[override]
        return self.variance == 0.0

    @property
    def strip(self) -> Strip:
        return (-math.inf, math.inf)

    def _mgf(self, z):
        return np.exp(self.mean * z + 0.5 * self.variance * z * z)

    def sample(self, rng, size):
        return rng.normal(self.mean, math.sqrt(self.variance), size)

    def expected_value(self) -> float:
        return self.mean

    def density(self, u):
        s2 = self.variance
        u = np.asarray(u, dtype=float)
        return np.exp(-0.5 * (u - self.mean) ** 2 / s2) / math.sqrt(2 * math.pi * s2)

    def integrate(self, f, breaks=(), growth=1.0, tol=1e-13):
        sd = math.sqrt(self.variance)
        if sd < 1e-9:  # a point mass up to O(variance)
            return float(np.asarray(f(np.array([self.mean])))[0])
        # shift the window towards the tilted mean so e^{growth u} tails are covered
        lo = self.mean + min(growth, 0.0) * self.variance - 9.5 * sd
        hi = self.mean + max(growth, 0.0) * self.variance + 9.5 * sd
        return integrate_density(f, self.density, lo, hi, breaks, tol)

    @property
    def params(self):
        return {"mean": self.mean, "variance": self.variance}


@dataclass(frozen=True)
class TwoSidedExponential(JumpLaw):
    """With probability ``prob_pos`` an Exp(rate_pos) up-jump, else an Exp(rate_neg) down-jump."""

    rate_pos: float
    rate_neg: float
    prob_pos: float
    kind: ClassVar[str] = "TwoSidedExponential"

    def __post_init__(self):
        _positive("rate_pos", self.rate_pos)
        _positive("rate_neg", self.rate_neg)
        if not 0.0 <= self.prob_pos <= 1.0:
            raise ModelError(f"must lie in [0, 1], got {self.prob_pos!r}", "prob_pos")

    @property
    def strip(self) -> Strip:
        return (-self.rate_neg, self.rate_pos)

    def _mgf(self, z):
        # written as 1 + O(z) so that the value at z = 0 is exactly 1
        p = self.prob_pos
        return 1.0 + p * z / (self.rate_pos - z) - (1 - p) * z / (self.rate_neg + z)

    def sample(self, rng, size):
        up = rng.random(size) < self.prob_pos
        e = rng.exponential(1.0, size)
        return np.where(up, e / self.rate_pos, -e / self.rate_neg)

    def expected_value(self) -> float:
        return self.prob_pos / self.rate_pos - (1 - self.prob_pos) / self.rate_neg

    def integrate(self, f, breaks=(), growth=1.0, tol=1e-13):
        p = self.prob_pos
        total = 0.0
        if p > 0:
            total += p * ExponentialPos(self.rate_pos).integrate(f, breaks, growth, tol)
        if p < 1:
            total += (1 - p) * ExponentialNeg(self.rate_neg).integrate(f, breaks, growth, tol)
        return total

    @property
    def params(self):
        return {"rate_pos": self.rate_pos, "rate_neg": self.rate_neg, "prob_pos": self.prob_pos}


@dataclass(frozen=True)
class Degenerate(JumpLaw):
    point: float = 0.0
    kind: ClassVar[str] = "Degenerate"
    has_atom: ClassVar[bool] = True

    def __post_init__(self):
        if not math.isfinite(self.point):
            raise ModelError("must be finite", "point")

    @property
    def strip(self) -> Strip:
        return (-math.inf, math.inf)

    def _mgf(self, z):
        if self.point == 0.0:
            return np.ones_like(z)
        return np.exp(self.point * z)

    def sample(self, rng, size):
        return np.full(size, self.point, dtype=float)

    def expected_value(self) -> float:
        return self.point

    def integrate(self, f, breaks=(), growth=1.0, tol=1e-13):
        return float(np.asarray(f(np.array([self.point])))[0])

    @property
    def params(self):
        return {"point": self.point}


_KINDS = {
    "ExponentialPos": lambda p: ExponentialPos(p["rate"]),
    "ExponentialNeg": lambda p: ExponentialNeg(p["rate"]),
    "Normal": lambda p: Normal(p.get("mean", 0.0), p["variance"]),
    "TwoSidedExponential": lambda p: TwoSidedExponential(p["rate_pos"], p["rate_neg"], p["prob_pos"]),
    "Degenerate": lambda p: Degenerate(p.get("point", 0.0)),
}


def law_from_json(obj, path: str = "law") -> JumpLaw:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ModelError("expected an object with 'kind' and 'params'", path)
    kind = obj["kind"]
    if kind not in _KINDS:
        raise ModelError(f"unknown law kind {kind!r}; expected one of {sorted(_KINDS)}", path + ".kind")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise ModelError("params must be an object", path + ".params")
    try:
        return _KINDS[kind](params)
    except KeyError as exc:
        raise ModelError(f"missing parameter {exc.args[0]!r}", path + ".params") from None
    except ModelError as exc:
        raise ModelError(exc.message, f"{path}.params.{exc.path}") from None
    except (TypeError, ValueError) as exc:
        raise ModelError(str(exc), path + ".params") from None
