"""Immutable MAP model: a finite Markov chain with per-state Lévy parts and switch jumps."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ModelError
from .laws import Degenerate, JumpLaw, Strip, intersect_strips, law_from_json



@dataclass(frozen=True)
class LevyComponent:
    """Drift, Brownian volatility and a finite list of compound-Poisson jump streams."""

    a: float = 0.0
    sigma: float = 0.0
    jumps: tuple[tuple[float, JumpLaw], ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.a):
            raise ModelError("drift must be finite", "a")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ModelError(f"sigma must be >= 0, got {self.sigma!r}", "sigma")
        jumps = tuple((float(rate), law) for rate, law in self.jumps)
        for i, (rate, law) in enumerate(jumps):
            if not (rate > 0 and math.isfinite(rate)):
                raise ModelError(f"intensity must be > 0, got {rate!r}", f"jumps[{i}].rate")
            if not isinstance(law, JumpLaw):
                raise ModelError("not a JumpLaw", f"jumps[{i}].law")
        object.__setattr__(self, "jumps", jumps)

    @property
    def strip(self) -> Strip:
        return intersect_strips([law.strip for _, law in self.jumps])

    @property
    def total_jump_rate(self) -> float:
        return sum(rate for rate, _ in self.jumps)

    def laplace_exponent(self, z, where: str = "component"):
        z = np.asarray(z)
        out = self.a * z + 0.5 * self.sigma ** 2 * z * z
        for i, (rate, law) in enumerate(self.jumps):
            out = out + rate * (law.mgf(z, where=f"{where} jump {i} ({law.describe()})") - 1.0)
        return out

    def to_json(self) -> dict:
        return {
            "a": self.a,
            "sigma": self.sigma,
            "jumps": [{"rate": rate, "law": law.to_json()} for rate, law in self.jumps],
        }


def _strongly_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]

    def reach(mat):
        seen = {0}
        todo = [0]
        while todo:
            i = todo.pop()
            for j in np.nonzero(mat[i])[0]:
                if j not in seen:
                    seen.add(int(j))
                    todo.append(int(j))
        return len(seen) == n

    return reach(adj) and reach(adj.T)


@dataclass(frozen=True, eq=False)
class MapModel:
    """Markov additive process specification.

    ``trans_jump`` maps ordered index pairs (i, j) to the law added to xi
    when the chain jumps from i to j; missing pairs mean no jump.
    """

    states: tuple[str, ...]
    q: np.ndarray
    levy: tuple[LevyComponent, ...]
    trans_jump: Mapping[tuple[int, int], JumpLaw] = field(default_factory=dict)
    r: float = 0.0

    def __post_init__(self):
        states = tuple(str(s) for s in self.states)
        d = len(states)
        if d < 1:
            raise ModelError("at least one state is required", "states")
        if len(set(states)) != d:
            raise ModelError("state labels must be unique", "states")
        q = np.array(self.q, dtype=float, copy=True)
        if q.shape != (d, d):
            raise ModelError(f"expected a {d}x{d} matrix, got shape {q.shape}", "q")
        if not np.all(np.isfinite(q)):
            raise ModelError("entries must be finite", "q")
        off = q - np.diag(np.diag(q))
        if np.any(off < 0):
            i, j = np.argwhere(off < 0)[0]
            raise ModelError("off-diagonal rates must be >= 0", f"q[{i}][{j}]")
        rows = q.sum(axis=1)
        scale = np.abs(q).sum(axis=1) + 1.0
        if np.any(np.abs(rows) > 1e-12 * scale):
            i = int(np.argmax(np.abs(rows) / scale))
            raise ModelError(f"row sums to {rows[i]:g}, not zero", f"q[{i}]")
        # make rows sum to zero bitwise
        np.fill_diagonal(q, 0.0)
        np.fill_diagonal(q, -q.sum(axis=1))
        if d > 1 and not _strongly_connected(off > 0):
            raise ModelError("the chain is not irreducible", "q")
        q.setflags(write=False)
        levy = tuple(self.levy)
        if len(levy) != d:
            raise ModelError(f"expected {d} Lévy components, got {len(levy)}", "levy")
        for i, comp in enumerate(levy):
            if not isinstance(comp, LevyComponent):
                raise ModelError("not a LevyComponent", f"levy[{states[i]}]")
        tj = {}
        for key, law in dict(self.trans_jump).items():
            i, j = int(key[0]), int(key[1])
            if not (0 <= i < d and 0 <= j < d) or i == j:
                raise ModelError("transition pair must name two distinct states", f"trans_jumps[{key}]")
            if not isinstance(law, JumpLaw):
                raise ModelError("not a JumpLaw", f"trans_jumps[{key}]")
            tj[(i, j)] = law
        if not math.isfinite(self.r):
            raise ModelError("must be finite", "r")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "levy", levy)
        object.__setattr__(self, "trans_jump", tj)
        object.__setattr__(self, "r", float(self.r))

    # ---- basic accessors -------------------------------------------------
    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def exit_rates(self) -> np.ndarray:
        return -np.diag(self.q)

    def index(self, state) -> int:
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if 0 <= state < self.n_states:
                return int(state)
            raise ModelError(f"state index {state} out of range", "state")
        label = str(state)
        if label in self.states:
            return self.states.index(label)
        raise ModelError(f"unknown state {label!r}; states are {list(self.states)}", "state")

    def jump_law(self, i: int, j: int) -> JumpLaw:
        return self.trans_jump.get((i, j), Degenerate(0.0))

    def active_transitions(self):
        """(i, j, rate, law) for every pair with a positive switching rate."""
        for i in range(self.n_states):
            for j in range(self.n_states):
                if i != j and self.q[i, j] > 0:
                    yield i, j, float(self.q[i, j]), self.jump_law(i, j)

    def active_transitions_from(self, i: int):
        return [tr for tr in self.active_transitions() if tr[0] == i]

    def component_strips(self) -> list[tuple[str, Strip]]:
        """Every strip that constrains F(z), labelled by the component it comes from."""
        out = []
        for i, comp in enumerate(self.levy):
            for k, (_, law) in enumerate(comp.jumps):
                out.append((f"state '{self.states[i]}' jump {k} ({law.describe()})", law.strip))
        for i, j, _, law in self.active_transitions():
            out.append((f"transition '{self.states[i]}->{self.states[j]}' ({law.describe()})", law.strip))
        return out

    @property
    def strip(self) -> Strip:
        return intersect_strips([s for _, s in self.component_strips()])

    # ---- derived models --------------------------------------------------
    def with_drifts(self, drifts: Sequence[float]) -> "MapModel":
        levy = tuple(replace(c, a=float(a)) for c, a in zip(self.levy, drifts))
        return replace(self, levy=levy)

    def shift_drifts(self, delta: float) -> "MapModel":
        return self.with_drifts([c.a + delta for c in self.levy])

    def with_rate(self, r: float) -> "MapModel":
        return replace(self, r=float(r))

    # ---- serialisation ---------------------------------------------------
    def to_json(self) -> dict:
        return {
            "states": list(self.states),
            "q": self.q.tolist(),
            "levy": {s: c.to_json() for s, c in zip(self.states, self.levy)},
            "trans_jumps": {
                f"{self.states[i]}->{self.states[j]}": law.to_json()
                for (i, j), law in sorted(self.trans_jump.items())
            },
            "r": self.r,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, obj) -> "MapModel":
        return model_from_json(obj)

    @classmethod
    def load(cls, path: str | Path) -> "MapModel":
        with open(path) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ModelError(f"invalid JSON: {exc}", str(path)) from None
        return model_from_json(obj)


def _number(obj, path):
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ModelError(f"expected a number, got {obj!r}", path)
    return float(obj)


def model_from_json(obj) -> MapModel:
    if not isinstance(obj, dict):
        raise ModelError("model must be a JSON object", "$")
    for key in ("states", "q", "levy"):
        if key not in obj:
            raise ModelError("missing required key", key)
    states = obj["states"]
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        raise ModelError("expected an array of strings", "states")
    if len(set(states)) != len(states):
        raise ModelError("state labels must be unique", "states")
    qraw = obj["q"]
    if not isinstance(qraw, list) or not all(isinstance(row, list) for row in qraw):
        raise ModelError("expected a matrix (array of arrays)", "q")
    q = [[_number(v, f"q[{i}][{j}]") for j, v in enumerate(row)] for i, row in enumerate(qraw)]
    levy_obj = obj["levy"]
    if not isinstance(levy_obj, dict):
        raise ModelError("expected an object keyed by state", "levy")
    unknown = set(levy_obj) - set(states)
    if unknown:
        raise ModelError(f"unknown state(s) {sorted(unknown)}", "levy")
    levy = []
    for s in states:
        path = f"levy.{s}"
        comp = levy_obj.get(s, {})
        if not isinstance(comp, dict):
            raise ModelError("expected an object", path)
        jumps = []
        for k, jump in enumerate(comp.get("jumps", [])):
            jp = f"{path}.jumps[{k}]"
            if not isinstance(jump, dict) or "rate" not in jump or "law" not in jump:
                raise ModelError("expected {rate, law}", jp)
            jumps.append((_number(jump["rate"], jp + ".rate"), law_from_json(jump["law"], jp + ".law")))
        try:
            levy.append(LevyComponent(
                _number(comp.get("a", 0.0), path + ".a"),
                _number(comp.get("sigma", 0.0), path + ".sigma"),
                tuple(jumps),
            ))
        except ModelError as exc:
            raise ModelError(exc.message, f"{path}.{exc.path}") from None
    tj = {}
    for key, law in (obj.get("trans_jumps") or {}).items():
        parts = key.split("->")
        if len(parts) != 2 or parts[0] not in states or parts[1] not in states:
            raise ModelError("key must look like 'from->to' with known states", f"trans_jumps.{key}")
        tj[(states.index(parts[0]), states.index(parts[1]))] = law_from_json(law, f"trans_jumps.{key}")
    r = _number(obj.get("r", 0.0), "r")
    return MapModel(tuple(states), np.array(q), tuple(levy), tj, r)
