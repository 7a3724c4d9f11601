from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class PriceEstimate:
    """A price with its error descriptor.

    ``error`` is a deterministic bound for "mellin" and "series" and one
    standard error for "mc" (see ``error_kind``).
    """

    value: float
    error: float
    method: str
    details: dict = field(default_factory=dict, compare=False)

    @property
    def error_kind(self) -> str:
        return "stderr" if self.method == "mc" else "bound"

    def __float__(self) -> float:
        return float(self.value)
