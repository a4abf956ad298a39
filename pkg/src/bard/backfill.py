"""Backfill bookkeeping: which doses are open, and where an arriving
stage-1 patient goes."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .boin import BoinParams
from .tally import DoseTally


class AssignmentKind(str, Enum):
    ESCALATION = "escalation"
    BACKFILL = "backfill"
    NOT_ENROLLED = "not-enrolled"


@dataclass(frozen=True)
class Assignment:
    kind: AssignmentKind
    dose: Optional[int] = None


@dataclass
class BackfillState:
    n_doses: int
    n_cap: int = 12
    engine: str = "boin"  # "boin" | "blrm"
    open: list[bool] = field(default_factory=list)
    permanently_closed: list[bool] = field(default_factory=list)
    n_backfilled: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.open:
            self.open = [False] * self.n_doses
        if not self.permanently_closed:
            self.permanently_closed = [False] * self.n_doses
        if not self.n_backfilled:
            self.n_backfilled = [0] * self.n_doses

    def open_doses(self) -> list[int]:
        return [j for j, o in enumerate(self.open) if o]


def refresh_backfill(
    state: BackfillState,
    tally: DoseTally,
    responses_observed: Sequence[int],
    c: int,
    params: Optional[BoinParams] = None,
    pods: Optional[np.ndarray] = None,
    eta: Optional[float] = None,
) -> BackfillState:
    """Recompute the open/closed set from current data.

    A dose b is open when it sits below the current escalation dose, is
    neither eliminated nor permanently closed, has observed activity (a
    completed response at b or any lower dose), and is not temporarily
    halted for toxicity. Toxicity halts: observed rate above lambda_d AND
    the pooled rate over {b, b+1} above lambda_d for the interval engine;
    overdose probability at or above eta for the model-based engine.
    Hitting ``n_cap`` evaluable patients closes a dose permanently; enrolled
    patients awaiting assessment also count against the cap so the dose
    cannot overshoot it.
    """
    any_response_upto = 0  # responses at doses <= b while scanning upward
    for b in range(state.n_doses):
        if tally.n[b] >= state.n_cap:
            state.permanently_closed[b] = True
        any_response_upto += responses_observed[b]
        is_open = (
            b < c
            and not state.permanently_closed[b]
            and not tally.eliminated[b]
            and any_response_upto > 0
            and tally.enrolled[b] < state.n_cap
        )
        if is_open and state.engine == "boin":
            if tally.n[b] > 0 and tally.rate(b) > params.lambda_d:
                pooled_n = tally.n[b] + tally.n[b + 1]
                pooled_y = tally.dlt[b] + tally.dlt[b + 1]
                if pooled_n > 0 and pooled_y / pooled_n > params.lambda_d:
                    is_open = False
        elif is_open and state.engine == "blrm":
            if pods is not None and pods[b] >= eta:
                is_open = False
        state.open[b] = is_open
    return state


def assign_patient(
    state: BackfillState, cohort_has_slot: bool, c: int
) -> Assignment:
    """Escalation cohort first; otherwise the highest open backfill dose;
    otherwise the patient is not enrolled."""
    if cohort_has_slot:
        return Assignment(AssignmentKind.ESCALATION, c)
    for b in range(state.n_doses - 1, -1, -1):
        if state.open[b]:
            return Assignment(AssignmentKind.BACKFILL, b)
    return Assignment(AssignmentKind.NOT_ENROLLED)
