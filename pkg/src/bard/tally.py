"""Shared dose-level bookkeeping used by both escalation engines."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Decision(str, Enum):
    ESCALATE = "escalate"
    STAY = "stay"
    DE_ESCALATE = "de-escalate"
    TERMINATE_ALL_TOXIC = "terminate-all-toxic"


class DecisionDeferred(RuntimeError):
    """Raised when a dose decision is requested before any assessment completed."""


@dataclass
class DoseTally:
    """Per-dose counts. ``n``/``dlt`` cover patients with a completed DLT
    assessment; ``enrolled`` additionally counts pending assessments;
    ``backfilled_assessed`` counts the completed assessments that came from
    backfill patients (needed for conflict detection)."""

    n_doses: int
    n: list[int] = field(default_factory=list)
    dlt: list[int] = field(default_factory=list)
    enrolled: list[int] = field(default_factory=list)
    backfilled_assessed: list[int] = field(default_factory=list)
    eliminated: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if self.n_doses < 1:
            raise ValueError("need at least one dose")
        for name in ("n", "dlt", "enrolled", "backfilled_assessed"):
            if not getattr(self, name):
                setattr(self, name, [0] * self.n_doses)
        if not self.eliminated:
            self.eliminated = [False] * self.n_doses
        self.validate()

    def validate(self) -> None:
        for j in range(self.n_doses):
            if not 0 <= self.dlt[j] <= self.n[j] <= self.enrolled[j]:
                raise ValueError(f"inconsistent counts at dose index {j}")
        # eliminated doses must form an upward-closed set
        for j in range(self.n_doses - 1):
            if self.eliminated[j] and not self.eliminated[j + 1]:
                raise ValueError("elimination flags must be upward closed")

    def rate(self, j: int) -> float:
        if self.n[j] == 0:
            raise DecisionDeferred(f"no completed assessments at dose index {j}")
        return self.dlt[j] / self.n[j]

    def copy(self) -> "DoseTally":
        return DoseTally(
            self.n_doses,
            list(self.n),
            list(self.dlt),
            list(self.enrolled),
            list(self.backfilled_assessed),
            list(self.eliminated),
        )
