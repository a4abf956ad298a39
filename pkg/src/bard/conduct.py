"""Event-sourced conduct of a live trial.

A TrialMachine folds an append-only event log into trial state and offers
command methods (enroll, record_outcome, advance, force_close) that
validate, emit events and apply them. Commands are the only writers;
``_apply`` is a pure, rng-free fold step, so replaying a log reproduces
the state exactly. Randomized assignments draw from a counter-addressed
stream keyed by the trial seed and are recorded inside the events.

The stage-1 decision logic is the same pure core the simulator uses:
decisions fire when a cohort that cannot grow further has every member
assessed.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import boin as boin_mod
from .backfill import BackfillState, refresh_backfill
from .blrm import BlrmCalculator, blrm_move, select_mtd_blrm
from .config import DesignConfig, MODE_BARD, design_from_dict, design_to_dict
from .events import (
    DECISION_TAKEN,
    DOSE_CLOSED,
    OUTCOME_RECORDED,
    PATIENT_ENROLLED,
    STAGE_ADVANCED,
    TRIAL_COMPLETED,
    TRIAL_CREATED,
    EventLog,
    ReplayError,
    TrialEvent,
)
from .minimization import ArmCounts, CovariateSpec, randomize, stage2_quota
from .obd import (
    ARM_HIGH,
    ARM_LOW,
    admissible,
    gate_pair,
    outcome_counts,
    select_obd_margin,
    select_obd_utility,
)
from .seeding import CounterUniform
from .tally import Decision, DoseTally

STAGE_1 = "stage1"
STAGE_2 = "stage2"
COMPLETED = "completed"
TERMINATED = "terminated"


class StateError(RuntimeError):
    """Command not valid in the current trial state."""


class NotFound(KeyError):
    pass


class QuotaExhausted(StateError):
    pass


@dataclass
class PatientView:
    pid: str
    covariates: tuple[int, ...]
    eligible: bool
    stage: int
    kind: str          # escalation | backfill | stage2
    dose: int
    dlt: Optional[bool] = None
    response: Optional[bool] = None


class TrialMachine:
    def __init__(self, trial_id: str, design: DesignConfig, seed: int, cohort_size: int = 3):
        self.trial_id = trial_id
        self.design = design
        self.seed = seed
        self.cohort_size = cohort_size
        self.events: list[TrialEvent] = []
        J = design.n_doses
        self.stage = STAGE_1
        self.tally = DoseTally(J)
        self.resp_obs = [0] * J
        self.esc_n = [0] * J          # completed escalation patients per dose
        self.n_backfilled = [0] * J
        self.c = design.start_dose
        self.cohort_members: list[str] = []
        self.cohort_open = True
        self.cohort_pending = 0
        self.esc_enrolled = 0
        self.patients: dict[str, PatientView] = {}
        self.order: list[str] = []
        self.stage1_done = False
        self.mtd: Optional[int] = None
        self.d_low: Optional[int] = None
        self.d_high: Optional[int] = None
        self.n1_low = 0
        self.n1_high = 0
        self.n2_star = 0
        self.counts: Optional[ArmCounts] = None
        self.n_assign_draws = 0
        self.last_decision: Optional[dict] = None
        self._calc: Optional[BlrmCalculator] = None

    # ------------------------------------------------------------------
    # helpers

    @property
    def calc(self) -> Optional[BlrmCalculator]:
        if self.design.engine == "blrm" and self._calc is None:
            self._calc = BlrmCalculator(self.design.blrm)
        return self._calc

    def _interval_probs(self):
        ptt, pod = self.calc.interval_probs(self.tally.dlt, self.tally.n)
        return ptt.tolist(), pod.tolist()

    def _dose_blocked(self, j: int) -> bool:
        if self.design.engine == "boin":
            return self.tally.eliminated[j]
        _, pods = self._interval_probs()
        return pods[j] >= self.design.blrm.eta

    def _backfill_state(self) -> BackfillState:
        bf = BackfillState(
            self.design.n_doses, self.design.n_cap, self.design.engine,
            n_backfilled=list(self.n_backfilled),
        )
        pods = None
        eta = None
        if self.design.engine == "blrm":
            _, pods = self._interval_probs()
            eta = self.design.blrm.eta
        refresh_backfill(
            bf, self.tally, self.resp_obs, self.c, self.design.boin, pods=pods, eta=eta
        )
        return bf

    def _assign_rng(self) -> CounterUniform:
        return CounterUniform(f"{self.seed}:assign", counter=self.n_assign_draws)

    def _next_seq(self) -> int:
        return len(self.events) + 1

    def _emit(self, kind: str, payload: dict) -> TrialEvent:
        ev = TrialEvent(self._next_seq(), kind, payload)
        self._apply(ev)
        return ev

    # ------------------------------------------------------------------
    # fold

    @classmethod
    def replay(cls, events) -> "TrialMachine":
        machine: Optional[TrialMachine] = None
        for ev in events:
            if machine is None:
                if ev.kind != TRIAL_CREATED:
                    raise ReplayError("log must start with trial_created", ev.seq)
                machine = cls(
                    ev.payload["trial_id"],
                    design_from_dict(ev.payload["design"]),
                    ev.payload["seed"],
                    ev.payload.get("cohort_size", 3),
                )
                machine.events.append(ev)
                continue
            machine._apply(ev)
        if machine is None:
            raise ReplayError("empty event log")
        return machine

    def _apply(self, ev: TrialEvent) -> None:
        self.events.append(ev)
        p = ev.payload
        if ev.kind == PATIENT_ENROLLED:
            rec = PatientView(
                p["pid"], tuple(p["covariates"]), p.get("eligible", True),
                p["stage"], p["kind"], p["dose"],
            )
            self.patients[rec.pid] = rec
            self.order.append(rec.pid)
            self.tally.enrolled[rec.dose] += 1
            if rec.kind == "escalation":
                self.cohort_members.append(rec.pid)
                self.cohort_pending += 1
                self.esc_enrolled += 1
                if len(self.cohort_members) >= self.cohort_size:
                    self.cohort_open = False
            elif rec.kind == "backfill":
                self.n_backfilled[rec.dose] += 1
            elif rec.kind == "stage2":
                if "arm" in p and self.counts is not None:
                    self.counts.add(p["arm"], self._project(rec.covariates))
                    self.n_assign_draws += p.get("draws", 1)
        elif ev.kind == OUTCOME_RECORDED:
            rec = self.patients[p["pid"]]
            first = rec.dlt is None
            prev_dlt, prev_resp = rec.dlt, rec.response
            rec.dlt = bool(p["dlt"])
            rec.response = bool(p.get("response") or False)
            if rec.stage == 1 and first:
                d = rec.dose
                self.tally.n[d] += 1
                if rec.dlt:
                    self.tally.dlt[d] += 1
                if rec.response:
                    self.resp_obs[d] += 1
                if rec.kind == "backfill":
                    self.tally.backfilled_assessed[d] += 1
                else:
                    self.esc_n[d] += 1
                if rec.pid in self.cohort_members and self.cohort_pending > 0:
                    self.cohort_pending -= 1
            elif rec.stage == 1 and p.get("amend"):
                # corrective event: adjust tallies by the delta; decisions
                # already taken stand as recorded
                d = rec.dose
                self.tally.dlt[d] += int(rec.dlt) - int(prev_dlt)
                self.resp_obs[d] += int(rec.response) - int(prev_resp)
        elif ev.kind == DOSE_CLOSED:
            if p.get("scope") == "eliminated":
                for j in range(p["dose"], self.design.n_doses):
                    self.tally.eliminated[j] = True
        elif ev.kind == DECISION_TAKEN:
            if p.get("action") != "assignment":
                self.last_decision = dict(p)
            if p.get("action") in ("move", "relocate"):
                self.c = p["target"]
                self.cohort_members = []
                self.cohort_open = True
                self.cohort_pending = 0
            elif p.get("action") == "close-cohort":
                self.cohort_open = False
            if p.get("stage1_complete"):
                self.stage1_done = True
        elif ev.kind == STAGE_ADVANCED:
            self.stage = STAGE_2
            self.mtd = p["mtd"]
            self.d_low = p["d_low"]
            self.d_high = p["d_high"]
            self.n1_low = p["n1_low"]
            self.n1_high = p["n1_high"]
            self.n2_star = p["n2_star"]
            spec = CovariateSpec(tuple(2 for _ in self.design.balance_factors))
            low = [
                self._project(q.covariates)
                for q in self.patients.values()
                if q.stage == 1 and q.eligible and self.d_low is not None and q.dose == self.d_low
            ]
            high = [
                self._project(q.covariates)
                for q in self.patients.values()
                if q.stage == 1 and q.eligible and q.dose == self.d_high
            ]
            self.counts = ArmCounts(spec)
            for v in low:
                self.counts.add(ARM_LOW, v)
            for v in high:
                self.counts.add(ARM_HIGH, v)
        elif ev.kind == TRIAL_COMPLETED:
            self.stage = TERMINATED if p.get("status") == TERMINATED else COMPLETED

    def _project(self, v: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(v[k] for k in self.design.balance_factors)

    # ------------------------------------------------------------------
    # commands

    def enroll(self, covariates, eligible: bool = True) -> tuple[list[TrialEvent], dict]:
        """Assign an arriving patient; returns (events, assignment view)."""
        if self.stage in (COMPLETED, TERMINATED):
            raise StateError(f"trial is {self.stage}")
        covariates = tuple(int(v) for v in covariates)
        if self.stage == STAGE_2:
            return self._enroll_stage2(covariates, eligible)
        can_escalate = (
            self.cohort_open
            and len(self.cohort_members) < self.cohort_size
            and self.esc_enrolled < self.design.max_n1
            and not self._dose_blocked(self.c)
        )
        if can_escalate:
            dose, kind = self.c, "escalation"
        else:
            if self.design.mode == MODE_BARD:
                bf = self._backfill_state()
                open_doses = bf.open_doses()
            else:
                open_doses = []
            if open_doses:
                dose, kind = max(open_doses), "backfill"
            else:
                return [], {
                    "assignment": "not-enrolled",
                    "dose": None,
                    "note": "no escalation slot and no dose open for backfilling",
                }
        pid = f"P{len(self.patients) + 1}"
        events = [
            self._emit(
                PATIENT_ENROLLED,
                {
                    "pid": pid, "covariates": list(covariates), "eligible": eligible,
                    "stage": 1, "kind": kind, "dose": dose,
                },
            ),
            self._emit(
                DECISION_TAKEN,
                {"action": "assignment", "pid": pid, "kind": kind, "dose": dose},
            ),
        ]
        return events, {"assignment": kind, "dose": dose, "patient_id": pid}

    def _enroll_stage2(self, covariates, eligible) -> tuple[list[TrialEvent], dict]:
        enrolled_stage2 = sum(1 for q in self.patients.values() if q.stage == 2)
        if enrolled_stage2 >= self.n2_star:
            raise QuotaExhausted(
                f"stage-2 quota of {self.n2_star} new patients already enrolled"
            )
        events = []
        if self.d_low is None:
            dose, arm, draws = self.d_high, None, 0
        else:
            rng = self._assign_rng()
            # randomize mutates counts, so it runs on a scratch copy; the
            # durable update happens when the event is applied
            arm = randomize(
                self.counts.copy(), self._project(covariates), self.design.r, rng
            )
            draws = rng.counter - self.n_assign_draws
            dose = self.d_low if arm == ARM_LOW else self.d_high
        pid = f"P{len(self.patients) + 1}"
        payload = {
            "pid": pid, "covariates": list(covariates), "eligible": eligible,
            "stage": 2, "kind": "stage2", "dose": dose,
        }
        if arm is not None:
            payload["arm"] = arm
            payload["draws"] = draws
        events.append(self._emit(PATIENT_ENROLLED, payload))
        if enrolled_stage2 + 1 >= self.n2_star:
            events.append(
                self._emit(
                    TRIAL_COMPLETED,
                    {"status": COMPLETED, "reason": "stage2-quota-reached"},
                )
            )
        return events, {"assignment": "stage2", "dose": dose, "patient_id": pid}

    def record_outcome(
        self, pid: str, dlt: bool, response: Optional[bool] = None,
        amend: bool = False,
    ) -> tuple[list[TrialEvent], dict]:
        """Record a patient outcome; re-submitting different values requires
        ``amend=True``, which appends a corrective event (tallies adjust,
        decisions already taken stand)."""
        if pid not in self.patients:
            raise NotFound(f"unknown patient {pid!r}")
        rec = self.patients[pid]
        changed = rec.dlt is not None and (
            bool(dlt), bool(response or False)
        ) != (rec.dlt, rec.response)
        if changed and not amend:
            raise StateError(
                f"conflicting outcome for {pid}; resubmit with amend to correct it"
            )
        payload = {"pid": pid, "dlt": bool(dlt), "response": bool(response or False)}
        if changed:
            payload["amend"] = True
        events = [self._emit(OUTCOME_RECORDED, payload)]
        if self.stage == STAGE_1 and not self.stage1_done:
            events.extend(self._stage1_step())
        return events, self.decision_summary()

    def _stage1_step(self) -> list[TrialEvent]:
        """Shared stage-1 reaction to new data: all-toxic check, epoch
        decision with eliminations and stopping, cohort force-handling."""
        events: list[TrialEvent] = []
        design = self.design
        J = design.n_doses
        cohort_size = self.cohort_size
        if design.engine == "blrm":
            _, pods = self._interval_probs()
            if pods[0] >= design.blrm.eta:
                events.append(self._emit(DECISION_TAKEN, {
                    "action": "terminate",
                    "decision": Decision.TERMINATE_ALL_TOXIC.value,
                    "explanation": "overdose probability at or above eta for every dose",
                    "stage1_complete": True,
                }))
                events.append(self._emit(TRIAL_COMPLETED, {"status": TERMINATED, "reason": "all-toxic"}))
                return events

        can_grow = (
            self.cohort_open
            and len(self.cohort_members) < cohort_size
            and self.esc_enrolled < design.max_n1
            and not self._dose_blocked(self.c)
        )
        epoch = self.cohort_members and self.cohort_pending == 0 and not can_grow
        if not epoch:
            events.extend(self._force_handle())
            return events

        bp = design.boin
        if design.engine == "boin":
            flags = boin_mod.eliminate_overdoses(self.tally, bp)
            if flags != self.tally.eliminated:
                first = next(
                    j for j in range(J) if flags[j] and not self.tally.eliminated[j]
                )
                events.append(self._emit(DOSE_CLOSED, {"dose": first, "scope": "eliminated"}))
            if self.tally.eliminated[0]:
                events.append(self._emit(DECISION_TAKEN, {
                    "action": "terminate",
                    "decision": "terminate",
                    "explanation": "the lowest dose is eliminated for toxicity",
                    "stage1_complete": True,
                }))
                events.append(self._emit(TRIAL_COMPLETED, {"status": TERMINATED, "reason": "all-eliminated"}))
                return events
            if self.tally.eliminated[self.c]:
                decision = Decision.DE_ESCALATE
                target = max(
                    (j for j in range(self.c) if not self.tally.eliminated[j]), default=0
                )
                explanation = "current dose eliminated for toxicity"
            else:
                decision, target = boin_mod.reconciled_decision(self.tally, self.c, bp)
                if decision == Decision.ESCALATE and self.tally.eliminated[target]:
                    target = self.c
                elif decision == Decision.DE_ESCALATE and target < 0:
                    target = 0
                explanation = self._boin_explanation(decision)
        else:
            ptt, pods = self._interval_probs()
            decision = blrm_move(ptt, pods, design.blrm.eta, self.c)
            target = self.c + (decision == Decision.ESCALATE) - (decision == Decision.DE_ESCALATE)
            explanation = self._blrm_explanation(ptt, pods, decision)

        stop = self.esc_enrolled + cohort_size > design.max_n1
        stop_reason = "maximum stage-1 escalation sample size reached" if stop else ""
        if design.engine == "boin" and not stop:
            if target == self.c and self.esc_n[self.c] >= bp.n_stop:
                stop = True
                stop_reason = f"{self.esc_n[self.c]} patients at the current dose with a stay decision"
            elif target < self.c:
                if target == 0 and self.esc_n[0] >= bp.n_stop:
                    stop = True
                    stop_reason = "de-escalation to the saturated lowest dose"
                elif target > 0 and self.tally.n[target] >= design.n_cap:
                    stop = True
                    stop_reason = "de-escalation to a dose at its evaluable cap"

        events.append(self._emit(DECISION_TAKEN, {
            "action": "move",
            "decision": decision.value,
            "at_dose": self.c,
            "target": self.c if stop else target,
            "n": self.tally.n[self.c],
            "dlt": self.tally.dlt[self.c],
            "explanation": explanation,
            "stage1_complete": stop,
            "stop_reason": stop_reason,
        }))
        return events

    def _force_handle(self) -> list[TrialEvent]:
        """Current dose became unavailable between epochs."""
        if not self._dose_blocked(self.c):
            return []
        if self.cohort_pending == 0:
            target = self.c
            for j in range(self.c - 1, -1, -1):
                if not self._dose_blocked(j):
                    target = j
                    break
            return [self._emit(DECISION_TAKEN, {
                "action": "relocate",
                "decision": Decision.DE_ESCALATE.value,
                "target": target,
                "explanation": "current dose no longer available for enrollment",
            })]
        if self.cohort_open:
            return [self._emit(DECISION_TAKEN, {
                "action": "close-cohort",
                "decision": "close-cohort",
                "explanation": "current dose blocked; assessing the cohort as is",
            })]
        return []

    def _boin_explanation(self, decision: Decision) -> str:
        bp = self.design.boin
        n, y = self.tally.n[self.c], self.tally.dlt[self.c]
        phat = y / n if n else float("nan")
        conflicts = boin_mod.conflicting_doses(self.tally, self.c, bp)
        if conflicts:
            q = boin_mod.pooled_rate(self.tally, conflicts[0], self.c)
            return (
                f"backfill conflict at dose {conflicts[0] + 1}: pooled rate "
                f"{q:.3f} vs (lambda_e={bp.lambda_e:.3f}, lambda_d={bp.lambda_d:.3f}) "
                f"-> {decision.value}"
            )
        if phat <= bp.lambda_e:
            cmp = f"p-hat = {y}/{n} = {phat:.3f} <= lambda_e = {bp.lambda_e:.3f}"
        elif phat > bp.lambda_d:
            cmp = f"p-hat = {y}/{n} = {phat:.3f} > lambda_d = {bp.lambda_d:.3f}"
        else:
            cmp = (
                f"p-hat = {y}/{n} = {phat:.3f} in (lambda_e={bp.lambda_e:.3f}, "
                f"lambda_d={bp.lambda_d:.3f}]"
            )
        return f"{cmp} -> {decision.value}"

    def _blrm_explanation(self, ptt, pods, decision: Decision) -> str:
        eta = self.design.blrm.eta
        adm = [j for j in range(len(ptt)) if pods[j] < eta]
        if not adm:
            return f"no dose has overdose probability below eta = {eta}"
        j_star = max(adm, key=lambda j: ptt[j])
        return (
            f"best dose {j_star + 1} (PTT={ptt[j_star]:.3f}, POD={pods[j_star]:.3f} "
            f"< eta={eta}) vs current -> {decision.value}"
        )

    def advance(self, override: Optional[tuple[int, int]] = None) -> tuple[list[TrialEvent], dict]:
        """Close stage 1, select the MTD, and set up the randomization stage."""
        if self.stage != STAGE_1:
            raise StateError(f"trial is in {self.stage}")
        if not self.stage1_done:
            raise StateError("stage-1 stopping condition not met yet")
        events: list[TrialEvent] = []
        if self.design.engine == "boin":
            mtd = boin_mod.select_mtd_boin(self.tally, self.design.boin)
        else:
            mtd = select_mtd_blrm(self.tally, self.design.blrm, self.calc)
        warnings = []
        if mtd is None and override is None:
            events.append(self._emit(TRIAL_COMPLETED, {"status": TERMINATED, "reason": "no-mtd"}))
            return events, {"mtd": None, "plan": None, "warnings": warnings}
        if override is not None:
            d_low, d_high = override
            for d in (d_low, d_high):
                if d is not None and self.tally.n[d] == 0:
                    warnings.append(f"override dose {d + 1} has no stage-1 data")
            if d_low is not None and d_high is not None and d_high - d_low != 1:
                warnings.append("override doses are not adjacent")
        else:
            d_high = mtd
            d_low = mtd - 1 if mtd >= 1 else None
        # stage-1 counts toward the stage-2 target cover eligible patients only
        n1_low = sum(
            1 for q in self.patients.values()
            if q.stage == 1 and q.eligible and d_low is not None and q.dose == d_low
        )
        n1_high = sum(
            1 for q in self.patients.values()
            if q.stage == 1 and q.eligible and q.dose == d_high
        )
        target = self.design.n2 if d_low is not None else self.design.n2 // 2
        if self.design.mode == MODE_BARD:
            n2_star = stage2_quota(target, n1_low, n1_high)
        else:
            n2_star = target
        events.append(self._emit(STAGE_ADVANCED, {
            "mtd": mtd, "d_low": d_low, "d_high": d_high,
            "n1_low": n1_low, "n1_high": n1_high, "n2_star": n2_star,
            "override": list(override) if override else None,
        }))
        if n2_star == 0:
            events.append(self._emit(TRIAL_COMPLETED, {
                "status": COMPLETED, "reason": "stage-1 patients already meet the stage-2 target",
            }))
        plan = {
            "mtd": mtd, "d_low": d_low, "d_high": d_high,
            "n1_low": n1_low, "n1_high": n1_high, "n2_star": n2_star,
        }
        return events, {"mtd": mtd, "plan": plan, "warnings": warnings}

    def force_close(self, reason: str = "force-closed") -> list[TrialEvent]:
        if self.stage in (COMPLETED, TERMINATED):
            raise StateError(f"trial already {self.stage}")
        return [self._emit(TRIAL_COMPLETED, {"status": COMPLETED, "reason": reason})]

    # ------------------------------------------------------------------
    # views

    def decision_summary(self) -> dict:
        """Current recommendation view; dose numbers are 1-based."""
        bf_open = []
        if self.stage == STAGE_1 and self.design.mode == MODE_BARD and not self.stage1_done:
            bf_open = self._backfill_state().open_doses()
        return {
            "stage": self.stage,
            "current_dose": self.c + 1,
            "open_backfill_doses": [j + 1 for j in bf_open],
            "eliminated_doses": [j + 1 for j, e in enumerate(self.tally.eliminated) if e],
            "stage1_complete": self.stage1_done,
            "last_decision": self.last_decision,
            "cohort": {
                "members": list(self.cohort_members),
                "open": self.cohort_open,
                "awaiting_assessment": self.cohort_pending,
            },
        }

    def state_view(self) -> dict:
        doses = []
        for j in range(self.design.n_doses):
            doses.append({
                "dose": j + 1,
                "enrolled": self.tally.enrolled[j],
                "assessed": self.tally.n[j],
                "dlt": self.tally.dlt[j],
                "responses": self.resp_obs[j],
                "backfilled": self.n_backfilled[j],
                "eliminated": self.tally.eliminated[j],
            })
        view = {
            "trial_id": self.trial_id,
            "stage": self.stage,
            "design": design_to_dict(self.design),
            "doses": doses,
            "decision": self.decision_summary(),
            "patients": [
                {
                    "pid": q.pid, "stage": q.stage, "kind": q.kind, "dose": q.dose + 1,
                    "covariates": list(q.covariates), "eligible": q.eligible,
                    "dlt": q.dlt, "response": q.response,
                }
                for q in (self.patients[pid] for pid in self.order)
            ],
            "events": len(self.events),
        }
        if self.stage in (STAGE_2, COMPLETED):
            view["stage2"] = self.stage2_view()
        return view

    def stage2_view(self) -> dict:
        enrolled_stage2 = sum(1 for q in self.patients.values() if q.stage == 2)
        balance = None
        if self.counts is not None:
            spec = self.counts.spec
            balance = []
            for k in range(spec.n_factors):
                for level in range(spec.n_levels[k]):
                    balance.append({
                        "factor": spec.names[k],
                        "level": level,
                        "low": self.counts.level_count(0, k, level),
                        "high": self.counts.level_count(1, k, level),
                    })
        return {
            "mtd": None if self.mtd is None else self.mtd + 1,
            "d_low": None if self.d_low is None else self.d_low + 1,
            "d_high": None if self.d_high is None else self.d_high + 1,
            "n1_low": self.n1_low,
            "n1_high": self.n1_high,
            "n2_star": self.n2_star,
            "enrolled_stage2": enrolled_stage2,
            "remaining_quota": max(0, self.n2_star - enrolled_stage2),
            "arm_totals": list(self.counts.totals) if self.counts else None,
            "balance_table": balance,
        }

    def _arm_outcome_data(self, dose: int):
        n = n_t = n_e = n_te = pending = 0
        for q in self.patients.values():
            if q.dose != dose:
                continue
            if self.design.mode != MODE_BARD and q.stage != 2:
                continue
            if q.dlt is None:
                pending += 1
                continue
            n += 1
            n_t += q.dlt
            n_e += bool(q.response)
            n_te += q.dlt and bool(q.response)
        return n, n_t, n_e, n_te, pending

    def obd_report(self) -> dict:
        """Both selection criteria with admissibility flags and balance table.

        Available once the stage-2 quota is reached or the trial is closed;
        earlier calls return the same structure flagged as partial.
        """
        if self.d_high is None:
            raise StateError("no stage-2 doses selected; advance the trial first")
        caveats = []
        enrolled_stage2 = sum(1 for q in self.patients.values() if q.stage == 2)
        if self.stage == STAGE_2 and enrolled_stage2 < self.n2_star:
            caveats.append(
                f"stage-2 enrollment incomplete ({enrolled_stage2}/{self.n2_star})"
            )
        g = self.design.gating
        hi = self._arm_outcome_data(self.d_high)
        if hi[4]:
            caveats.append(f"{hi[4]} outcomes pending at the higher dose")
        if self.d_low is None:
            safe, eff = admissible((hi[1], hi[0]), (hi[2], hi[0]), g)
            sel = self.d_high if safe and eff else None
            arms = [self._arm_report(self.d_high, hi, safe, eff)]
            margin_sel = utility_sel = sel
        else:
            lo = self._arm_outcome_data(self.d_low)
            if lo[4]:
                caveats.append(f"{lo[4]} outcomes pending at the lower dose")
            (safe_l, eff_l), (safe_h, eff_h) = gate_pair(
                (lo[1], lo[0]), (lo[2], lo[0]), (hi[1], hi[0]), (hi[2], hi[0]), g
            )
            adm_l, adm_h = safe_l and eff_l, safe_h and eff_h
            p_low = lo[2] / lo[0] if lo[0] else 0.0
            p_high = hi[2] / hi[0] if hi[0] else 0.0
            arm1 = select_obd_margin(p_low, p_high, g.delta, adm_l, adm_h, g.noninferiority_margin)
            arm2 = select_obd_utility(
                outcome_counts(lo[0], lo[1], lo[2], lo[3]),
                outcome_counts(hi[0], hi[1], hi[2], hi[3]),
                self.design.utility, self.design.dirichlet_prior, adm_l, adm_h,
            )
            to_dose = lambda arm: None if arm is None else (self.d_low if arm == ARM_LOW else self.d_high)
            margin_sel, utility_sel = to_dose(arm1), to_dose(arm2)
            arms = [
                self._arm_report(self.d_low, lo, safe_l, eff_l),
                self._arm_report(self.d_high, hi, safe_h, eff_h),
            ]
        return {
            "obd_margin": None if margin_sel is None else margin_sel + 1,
            "obd_utility": None if utility_sel is None else utility_sel + 1,
            "arms": arms,
            "balance": self.stage2_view(),
            "partial": bool(caveats),
            "caveats": caveats,
        }

    def _arm_report(self, dose, data, safe, effective) -> dict:
        n, n_t, n_e, n_te, pending = data
        return {
            "dose": dose + 1,
            "n": n,
            "dlt": n_t,
            "responses": n_e,
            "observed_dlt_rate": n_t / n if n else None,
            "observed_response_rate": n_e / n if n else None,
            "safe": safe,
            "effective": effective,
            "pending": pending,
        }


class TrialStore:
    """File-backed trial registry: one JSON-lines event log per trial plus
    a designs directory; per-trial writes are serialized."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        (self.data_dir / "trials").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "designs").mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def lock(self, trial_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(trial_id, threading.Lock())

    # ----- designs -----
    def save_design(self, design: DesignConfig, design_id: Optional[str] = None) -> str:
        design_id = design_id or uuid.uuid4().hex[:10]
        path = self.data_dir / "designs" / f"{design_id}.json"
        path.write_text(json.dumps(design_to_dict(design), indent=1))
        return design_id

    def load_design(self, design_id: str) -> DesignConfig:
        path = self.data_dir / "designs" / f"{design_id}.json"
        if not path.exists():
            raise NotFound(f"unknown design {design_id!r}")
        return design_from_dict(json.loads(path.read_text()))

    def design_ids(self) -> list[str]:
        return sorted(p.stem for p in (self.data_dir / "designs").glob("*.json"))

    # ----- trials -----
    def _log(self, trial_id: str) -> EventLog:
        return EventLog(self.data_dir / "trials" / f"{trial_id}.jsonl")

    def create_trial(
        self, design: DesignConfig, seed: int, trial_id: Optional[str] = None,
        cohort_size: int = 3,
    ) -> TrialMachine:
        trial_id = trial_id or uuid.uuid4().hex[:10]
        log = self._log(trial_id)
        if log.path.exists():
            raise StateError(f"trial {trial_id!r} already exists")
        machine = TrialMachine(trial_id, design, seed, cohort_size)
        created = TrialEvent(1, TRIAL_CREATED, {
            "trial_id": trial_id, "design": design_to_dict(design), "seed": seed,
            "cohort_size": cohort_size,
        })
        machine.events.append(created)
        log.append([created])
        return machine

    def load(self, trial_id: str) -> TrialMachine:
        log = self._log(trial_id)
        if not log.path.exists():
            raise NotFound(f"unknown trial {trial_id!r}")
        return TrialMachine.replay(log.read())

    def commit(self, trial_id: str, events: list[TrialEvent]) -> None:
        if events:
            self._log(trial_id).append(events)

    def trial_ids(self) -> list[str]:
        return sorted(p.stem for p in (self.data_dir / "trials").glob("*.jsonl"))
