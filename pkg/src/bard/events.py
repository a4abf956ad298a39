"""Append-only trial event log: kinds, serialization, and file storage.

State is a pure fold over events; every event is a fact (assignments and
decisions are recorded with their outcomes, so replay never re-derives
randomness).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator

TRIAL_CREATED = "trial_created"
PATIENT_ENROLLED = "patient_enrolled"
OUTCOME_RECORDED = "outcome_recorded"
DECISION_TAKEN = "decision_taken"
STAGE_ADVANCED = "stage_advanced"
DOSE_CLOSED = "dose_closed"
TRIAL_COMPLETED = "trial_completed"

KINDS = (
    TRIAL_CREATED,
    PATIENT_ENROLLED,
    OUTCOME_RECORDED,
    DECISION_TAKEN,
    STAGE_ADVANCED,
    DOSE_CLOSED,
    TRIAL_COMPLETED,
)


class ReplayError(RuntimeError):
    def __init__(self, msg: str, seq: int | None = None):
        super().__init__(msg)
        self.seq = seq


@dataclass(frozen=True)
class TrialEvent:
    seq: int
    kind: str
    payload: dict = field(default_factory=dict)
    ts: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not self.ts:
            object.__setattr__(
                self, "ts", datetime.now(timezone.utc).isoformat(timespec="seconds")
            )

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "ts": self.ts, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str, expect_seq: int | None = None) -> "TrialEvent":
        try:
            raw = json.loads(line)
            ev = cls(raw["seq"], raw["kind"], raw.get("payload", {}), raw.get("ts", ""))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ReplayError(f"corrupt event record: {exc}", expect_seq) from exc
        if expect_seq is not None and ev.seq != expect_seq:
            raise ReplayError(
                f"event sequence broken: expected {expect_seq}, found {ev.seq}",
                expect_seq,
            )
        return ev


class EventLog:
    """One JSON-lines file per trial, append-only."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, events: list[TrialEvent]) -> None:
        with open(self.path, "a") as fh:
            for ev in events:
                fh.write(ev.to_json() + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def read(self) -> Iterator[TrialEvent]:
        if not self.path.exists():
            raise ReplayError(f"no event log at {self.path}")
        with open(self.path) as fh:
            for i, line in enumerate(fh, start=1):
                if line.strip():
                    yield TrialEvent.from_json(line, expect_seq=i)
