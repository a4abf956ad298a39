"""Event-driven trial simulator and operating-characteristics replicator.

A single trial runs stage-1 escalation with concurrent backfill on a
continuous clock (Poisson accrual, fixed assessment windows, staggered
escalation cohorts), selects the MTD, then enrolls the remaining stage-2
quota under the configured randomization regime and calls the OBD.
Replications derive independent streams from (master seed, replication
index), so reports are identical under any parallelism.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from multiprocessing import get_context
from typing import Optional, Sequence

import numpy as np

from . import boin as boin_mod
from .backfill import BackfillState, refresh_backfill
from .blrm import BlrmCalculator, blrm_move, select_mtd_blrm
from .config import (
    MODE_BARD,
    MODE_PS_FULL,
    DesignConfig,
    TimingModel,
    comparator_designs,  # noqa: F401  (re-exported: part of this module's surface)
)
from .minimization import ArmCounts, CovariateSpec, randomize, seed_from_stage1, stage2_quota
from .obd import (
    ARM_LOW,
    admissible,
    gate_pair,
    outcome_counts,
    select_obd_margin,
    select_obd_utility,
)
from .scenarios import ScenarioTruth, efficacy_prob
from .seeding import CounterUniform, derived_rng
from .tally import Decision, DoseTally


@dataclass(slots=True)
class PatientRecord:
    pid: int
    arrival: float
    stage: int
    kind: str  # "escalation" | "backfill" | "stage2"
    dose: int
    covariates: tuple[int, ...]
    dlt: bool
    response: bool
    assess_time: float


@dataclass
class TrialResult:
    patients: list[PatientRecord]
    stage1_end: float
    trial_end: float
    terminated: bool
    mtd: Optional[int]
    d_low: Optional[int]
    d_high: Optional[int]
    n1_low: int
    n1_high: int
    n2_star: int
    obd_margin: Optional[int]
    obd_utility: Optional[int]
    n_turned_away: int
    decisions: list[tuple] = field(default_factory=list)
    # final per-dose completed tallies, for diagnostics and oracle tests
    final_n: list[int] = field(default_factory=list)
    final_dlt: list[int] = field(default_factory=list)
    eliminated: list[bool] = field(default_factory=list)


@lru_cache(maxsize=4096)
def _elim_min_dlt(n: int, phi: float, cutoff: float, min_n: int) -> int:
    """Smallest DLT count eliminating a dose with n assessed (n+1 if never)."""
    y = boin_mod.elimination_min_dlt(n, phi, cutoff, min_n)
    return (n + 1) if y is None else y


def run_trial(
    design: DesignConfig,
    truth: ScenarioTruth,
    timing: TimingModel,
    rng,
    assign_rng=None,
    _calc: Optional[BlrmCalculator] = None,
) -> TrialResult:
    """Simulate one complete trial.

    ``rng`` drives accrual, covariates and outcomes; ``assign_rng`` drives
    stage-2 randomization (defaults to ``rng``). The decision logic is the
    same pure-function core the conduct service uses.
    """
    J = design.n_doses
    if truth.n_doses != J:
        raise ValueError("scenario dose count does not match the design")
    engine = design.engine
    bp = design.boin
    lp = design.blrm
    calc = _calc
    if engine == "blrm" and calc is None:
        calc = BlrmCalculator(lp)
    if assign_rng is None:
        assign_rng = rng
    backfill_active = design.mode == MODE_BARD
    rate = timing.accrual_rate
    window = timing.dlt_window
    resp_window = timing.response_window
    cohort_size = timing.cohort_size
    max_n1 = design.max_n1

    tally = DoseTally(J)
    n_compl, y_dlt = tally.n, tally.dlt
    enrolled, bf_assessed = tally.enrolled, tally.backfilled_assessed
    eliminated = tally.eliminated
    resp_obs = [0] * J
    esc_n = [0] * J  # completed escalation-cohort patients, for the n_stop rule
    bf = BackfillState(J, design.n_cap, engine)

    c = design.start_dose
    cohort_open = True
    cohort_members = 0
    cohort_pending = 0
    esc_enrolled = 0
    final_cohort = 2 * cohort_size > max_n1
    patients: list[PatientRecord] = []
    pending: deque[int] = deque()  # pids in assessment-completion order
    decisions: list[tuple] = []
    turned_away = 0
    holding = False  # queue mode: accrual suspended, one patient waiting
    last_arrival_seen = [0.0]
    stage1_end = None
    terminated = False

    if engine == "blrm":
        ptt0, pod0 = calc.interval_probs(y_dlt, n_compl)
        cur_ptt, cur_pods = ptt0.tolist(), pod0.tolist()
        # decisions, escalation blocking and the all-toxic stop use the
        # posterior as of the last decision epoch; the running posterior
        # only drives backfill closing
        epoch_ptt, epoch_pods = cur_ptt, cur_pods
    else:
        cur_ptt = cur_pods = epoch_ptt = epoch_pods = None

    def draw_gap() -> float:
        if timing.deterministic_accrual:
            return 1.0 / rate
        return -math.log(1.0 - rng.random()) / rate

    t_arrival = draw_gap()

    def dose_blocked(d: int) -> bool:
        if engine == "boin":
            return eliminated[d]
        return epoch_pods[d] >= lp.eta

    def enroll(t: float, dose: int, kind: str, stage: int, v=None) -> PatientRecord:
        if v is None:
            v = tuple(1 if rng.random() < p else 0 for p in truth.cov_prevalence)
        had_dlt = rng.random() < truth.dlt_rates[dose]
        responded = rng.random() < efficacy_prob(truth, dose, v)
        rec = PatientRecord(
            len(patients), t, stage, kind, dose, v, had_dlt, responded, t + window
        )
        patients.append(rec)
        enrolled[dose] += 1
        if stage == 1 and responded:
            resp_obs[dose] += 1
        if t > last_arrival_seen[0]:
            last_arrival_seen[0] = t
        return rec

    def try_stage1_assignment(t: float) -> bool:
        """Enroll one arriving patient if any stage-1 slot is available."""
        nonlocal cohort_members, cohort_pending, cohort_open, esc_enrolled
        if (
            cohort_open
            and cohort_members < cohort_size
            and esc_enrolled < max_n1
            and not dose_blocked(c)
        ):
            enroll(t, c, "escalation", 1)
            pending.append(len(patients) - 1)
            cohort_members += 1
            cohort_pending += 1
            esc_enrolled += 1
            if cohort_members == cohort_size:
                cohort_open = False
            return True
        if backfill_active and not final_cohort:
            refresh_backfill(
                bf, tally, resp_obs, c, bp, pods=cur_pods, eta=lp.eta if lp else None
            )
            for b in range(J - 1, -1, -1):
                if bf.open[b]:
                    enroll(t, b, "backfill", 1)
                    pending.append(len(patients) - 1)
                    bf.n_backfilled[b] += 1
                    return True
        return False

    def highest_open_dose_below(d: int) -> int:
        for j in range(d - 1, -1, -1):
            if not dose_blocked(j):
                return j
        return 0  # callers guarantee at least dose 0 is usable

    def force_move_if_blocked(t: float) -> None:
        """Current dose became unavailable between epochs: close the cohort
        early, or relocate immediately when nothing is under assessment."""
        nonlocal c, cohort_open, cohort_members, cohort_pending
        if not dose_blocked(c):
            return
        if cohort_pending == 0:
            c = highest_open_dose_below(c)
            cohort_open = True
            cohort_members = 0
        elif cohort_open:
            cohort_open = False  # assess with the members it has

    # ----- stage 1 event loop -------------------------------------------
    while True:
        t_complete = patients[pending[0]].assess_time if pending else math.inf
        if t_arrival <= t_complete:
            t = t_arrival
            t_arrival = t + draw_gap()
            if not try_stage1_assignment(t):
                if design.queue_when_closed:
                    holding = True  # accrual suspends until a slot opens
                    t_arrival = math.inf
                else:
                    turned_away += 1
                    if turned_away > 100000:
                        raise RuntimeError(
                            f"DEADLOCK c={c} open={cohort_open} members={cohort_members} "
                            f"pending_c={cohort_pending} esc={esc_enrolled} elim={eliminated} "
                            f"n={n_compl} y={y_dlt} enrolled={enrolled} resp={resp_obs} "
                            f"bfopen={bf.open} perm={bf.permanently_closed} npend={len(pending)}"
                        )
            continue

        # assessment completion
        t = t_complete
        pid = pending.popleft()
        rec = patients[pid]
        d = rec.dose
        n_compl[d] += 1
        if rec.dlt:
            y_dlt[d] += 1
        if rec.kind == "backfill":
            bf_assessed[d] += 1
        else:
            esc_n[d] += 1
        is_cohort_member = rec.kind == "escalation" and d == c and cohort_pending > 0
        if is_cohort_member:
            cohort_pending -= 1

        if engine == "blrm":
            ptt_a, pod_a = calc.interval_probs(y_dlt, n_compl)
            cur_ptt, cur_pods = ptt_a.tolist(), pod_a.tolist()

        # a decision epoch fires once every member of a cohort that cannot
        # grow further (filled, force-closed, quota exhausted, or current
        # dose blocked) has a completed assessment
        can_grow = (
            cohort_open
            and cohort_members < cohort_size
            and esc_enrolled < max_n1
            and not dose_blocked(c)
        )
        epoch = cohort_members > 0 and cohort_pending == 0 and not can_grow
        if not epoch:
            force_move_if_blocked(t)
            if holding and try_stage1_assignment(t):
                holding = False
                t_arrival = t + draw_gap()
            continue

        # ----- decision epoch ------------------------------------------
        if engine == "boin":
            # the overdose rule is evaluated on the data in hand when the
            # decision is taken
            for j in range(J):
                if not eliminated[j] and y_dlt[j] >= _elim_min_dlt(
                    n_compl[j], bp.phi, bp.elimination_cutoff, bp.elimination_min_n
                ):
                    for k in range(j, J):
                        eliminated[k] = True
                    break
            if eliminated[0]:
                terminated = True
                stage1_end = t
                break
            if eliminated[c]:
                decision, target = Decision.DE_ESCALATE, highest_open_dose_below(c)
            else:
                decision, target = boin_mod.reconciled_decision(tally, c, bp)
                if decision == Decision.ESCALATE and eliminated[target]:
                    target = c
                elif decision == Decision.DE_ESCALATE and target < 0:
                    target = 0  # every administered dose suspect; hold the floor
        else:
            epoch_ptt, epoch_pods = cur_ptt, cur_pods
            decision = blrm_move(epoch_ptt, epoch_pods, lp.eta, c)
            if decision == Decision.TERMINATE_ALL_TOXIC:
                terminated = True
                stage1_end = t
                break
            target = c + (decision == Decision.ESCALATE) - (decision == Decision.DE_ESCALATE)
        decisions.append((t, c, n_compl[c], y_dlt[c], decision.value, target))

        # stop when there is no room left for a full escalation cohort;
        # when the decision stays at a dose already carrying n_stop
        # escalation patients; or when a de-escalation would return to a
        # dose that can take no more patients (the saturated lowest dose,
        # or any dose at the per-dose evaluable cap)
        stop = esc_enrolled + cohort_size > max_n1
        if engine == "boin" and not stop:
            if target == c:
                stop = esc_n[c] >= bp.n_stop
            elif target < c:
                if target == 0 and esc_n[0] >= bp.n_stop:
                    stop = True
                elif target > 0 and n_compl[target] >= design.n_cap:
                    stop = True
        if stop:
            stage1_end = t
            break
        c = target
        cohort_open = True
        cohort_members = 0
        cohort_pending = 0
        final_cohort = esc_enrolled + 2 * cohort_size > max_n1
        force_move_if_blocked(t)
        if holding and try_stage1_assignment(t):
            holding = False
            t_arrival = t + draw_gap()

    # ----- stage-1 wrap-up ----------------------------------------------
    if terminated:
        mtd = None
    elif engine == "boin":
        mtd = boin_mod.select_mtd_boin(tally, bp)
    else:
        mtd = select_mtd_blrm(tally, lp, calc)

    if mtd is None:
        trial_end = max(stage1_end, last_arrival_seen[0])
        return TrialResult(
            patients, stage1_end, trial_end, True, None, None, None,
            0, 0, 0, None, None, turned_away, decisions,
            list(n_compl), list(y_dlt), list(eliminated),
        )

    d_high = mtd
    d_low = mtd - 1 if mtd >= 1 else None
    two_arm = d_low is not None
    n1_low = enrolled[d_low] if two_arm else 0
    n1_high = enrolled[d_high]
    target_n2 = design.n2 if two_arm else design.n2 // 2

    if design.mode == MODE_BARD:
        n2_star = stage2_quota(target_n2, n1_low, n1_high)
    else:
        n2_star = target_n2

    # ----- stage 2 --------------------------------------------------------
    spec = CovariateSpec(tuple(2 for _ in design.balance_factors))
    project = lambda v: tuple(v[k] for k in design.balance_factors)
    counts = None
    if two_arm and design.mode == MODE_BARD:
        counts = seed_from_stage1(
            spec,
            (project(p.covariates) for p in patients if p.dose == d_low),
            (project(p.covariates) for p in patients if p.dose == d_high),
        )
    elif two_arm and design.mode == MODE_PS_FULL:
        counts = ArmCounts(spec)
    block_first: Optional[int] = None

    if design.queue_when_closed and holding:
        t_arrival = stage1_end  # the waiting patient enters as stage 2 opens
    for _ in range(n2_star):
        t = t_arrival
        t_arrival = t + draw_gap()
        v = tuple(1 if rng.random() < p else 0 for p in truth.cov_prevalence)
        if not two_arm:
            dose = d_high
        elif counts is not None:
            arm = randomize(counts, project(v), design.r, assign_rng)
            dose = d_low if arm == ARM_LOW else d_high
        else:  # simple randomization in permuted blocks of two
            if block_first is None:
                block_first = 0 if assign_rng.random() < 0.5 else 1
                arm = block_first
            else:
                arm = 1 - block_first
                block_first = None
            dose = d_low if arm == ARM_LOW else d_high
        rec = enroll(t, dose, "stage2", 2, v)
        rec.assess_time = t + resp_window

    trial_end = max(stage1_end, last_arrival_seen[0])

    obd_margin, obd_utility = _call_obd(design, patients, d_low, d_high, assign_rng)
    return TrialResult(
        patients, stage1_end, trial_end, False, mtd, d_low, d_high,
        n1_low, n1_high, n2_star, obd_margin, obd_utility, turned_away,
        decisions, list(n_compl), list(y_dlt), list(eliminated),
    )


def _arm_data(patients: Sequence[PatientRecord], dose: int, stage2_only: bool):
    n = n_tox = n_eff = n_both = 0
    for p in patients:
        if p.dose != dose or (stage2_only and p.stage != 2):
            continue
        n += 1
        n_tox += p.dlt
        n_eff += p.response
        n_both += p.dlt and p.response
    return n, n_tox, n_eff, n_both


def _call_obd(design: DesignConfig, patients, d_low, d_high, tie_rng=None):
    """Both OBD criteria on the analysis set (combined data under the
    seamless regime, stage-2 data only under the comparators)."""
    stage2_only = design.mode != MODE_BARD
    g = design.gating
    hi = _arm_data(patients, d_high, stage2_only)
    if d_low is None:
        safe, effective = admissible((hi[1], hi[0]), (hi[2], hi[0]), g)
        sel = d_high if (safe and effective) else None
        return sel, sel
    lo = _arm_data(patients, d_low, stage2_only)
    (safe_l, eff_l), (safe_h, eff_h) = gate_pair(
        (lo[1], lo[0]), (lo[2], lo[0]), (hi[1], hi[0]), (hi[2], hi[0]), g
    )
    adm_l = safe_l and eff_l
    adm_h = safe_h and eff_h
    p_low = lo[2] / lo[0] if lo[0] else 0.0
    p_high = hi[2] / hi[0] if hi[0] else 0.0
    arm1 = select_obd_margin(
        p_low, p_high, g.delta, adm_l, adm_h, g.noninferiority_margin, tie_rng
    )
    arm2 = select_obd_utility(
        outcome_counts(lo[0], lo[1], lo[2], lo[3]),
        outcome_counts(hi[0], hi[1], hi[2], hi[3]),
        design.utility,
        design.dirichlet_prior,
        adm_l,
        adm_h,
        tie_rng,
    )
    to_dose = lambda arm: None if arm is None else (d_low if arm == ARM_LOW else d_high)
    return to_dose(arm1), to_dose(arm2)


# ---------------------------------------------------------------------------
# Replication and reporting

_METRIC_FIELDS = (
    "n", "duration", "n1", "correct1", "correct2", "carried",
    "imb_x1", "imb_x2", "imb_x3", "alloc_imb",
    "n1_low", "n1_high", "alloc1", "turned_away", "no_mtd",
)


def trial_metrics(res: TrialResult, design: DesignConfig, truth: ScenarioTruth) -> tuple:
    """Per-replication metric vector (NaN where a quantity is undefined)."""
    nan = math.nan
    n1 = sum(1 for p in res.patients if p.stage == 1)
    correct1 = float(res.obd_margin == truth.true_obd)
    correct2 = float(res.obd_utility == truth.true_obd)
    carried = float(
        truth.true_obd in {d for d in (res.d_low, res.d_high) if d is not None}
    )
    imb = [nan, nan, nan]
    alloc = nan
    n1_low = n1_high = alloc1 = nan
    if res.d_low is not None:
        stage2_only = design.mode != MODE_BARD
        low = [p for p in res.patients
               if p.dose == res.d_low and not (stage2_only and p.stage != 2)]
        high = [p for p in res.patients
                if p.dose == res.d_high and not (stage2_only and p.stage != 2)]
        if low and high:
            for k in range(3):
                prop_l = sum(p.covariates[k] for p in low) / len(low)
                prop_h = sum(p.covariates[k] for p in high) / len(high)
                imb[k] = abs(prop_l - prop_h) * 100.0
            alloc = abs(len(low) - len(high))
        n1_low, n1_high = res.n1_low, res.n1_high
        alloc1 = abs(res.n1_low - res.n1_high)
    return (
        float(len(res.patients)), res.trial_end, float(n1), correct1, correct2,
        carried, imb[0], imb[1], imb[2], alloc, n1_low, n1_high, alloc1,
        float(res.n_turned_away), float(res.mtd is None),
    )


@dataclass(frozen=True)
class OcReport:
    design: str
    scenario: str
    reps: int
    seed: int
    mean_n: float
    mean_duration: float
    imbalance_x1: float
    imbalance_x2: float
    imbalance_x3: float
    allocation_imbalance: float
    pcs1: float
    pcs2: float
    mean_n1: float
    pcs_stage2_doses: float
    mean_n1_low: float
    mean_n1_high: float
    allocation_imbalance_stage1: float
    pct_no_mtd: float
    mean_turned_away: float

    CSV_COLUMNS = (
        "design", "scenario", "reps", "seed", "N", "Duration",
        "Imbalance_X1", "Imbalance_X2", "Imbalance_X3", "Imbalance_allocation",
        "PCS1", "PCS2", "N1", "PCS_stage2_doses", "n1_low", "n1_high",
        "Imbalance_allocation_stage1", "pct_no_mtd", "turned_away",
    )

    def csv_row(self) -> list:
        return [
            self.design, self.scenario, self.reps, self.seed,
            round(self.mean_n, 4), round(self.mean_duration, 4),
            round(self.imbalance_x1, 4), round(self.imbalance_x2, 4),
            round(self.imbalance_x3, 4), round(self.allocation_imbalance, 4),
            round(self.pcs1, 4), round(self.pcs2, 4),
            round(self.mean_n1, 4), round(self.pcs_stage2_doses, 4),
            round(self.mean_n1_low, 4), round(self.mean_n1_high, 4),
            round(self.allocation_imbalance_stage1, 4),
            round(self.pct_no_mtd, 4), round(self.mean_turned_away, 4),
        ]


def _nanmean(col: np.ndarray) -> float:
    return float("nan") if np.all(np.isnan(col)) else float(np.nanmean(col))


def report_from_metrics(
    metrics: np.ndarray, design: DesignConfig, truth: ScenarioTruth, reps: int, seed: int
) -> OcReport:
    m = {name: metrics[:, i] for i, name in enumerate(_METRIC_FIELDS)}
    return OcReport(
        design=design.label,
        scenario=truth.name,
        reps=reps,
        seed=seed,
        mean_n=float(np.mean(m["n"])),
        mean_duration=float(np.mean(m["duration"])),
        imbalance_x1=_nanmean(m["imb_x1"]),
        imbalance_x2=_nanmean(m["imb_x2"]),
        imbalance_x3=_nanmean(m["imb_x3"]),
        allocation_imbalance=_nanmean(m["alloc_imb"]),
        pcs1=float(np.mean(m["correct1"])) * 100.0,
        pcs2=float(np.mean(m["correct2"])) * 100.0,
        mean_n1=float(np.mean(m["n1"])),
        pcs_stage2_doses=float(np.mean(m["carried"])) * 100.0,
        mean_n1_low=_nanmean(m["n1_low"]),
        mean_n1_high=_nanmean(m["n1_high"]),
        allocation_imbalance_stage1=_nanmean(m["alloc1"]),
        pct_no_mtd=float(np.mean(m["no_mtd"])) * 100.0,
        mean_turned_away=float(np.mean(m["turned_away"])),
    )


def run_replication(
    design: DesignConfig,
    truth: ScenarioTruth,
    timing: TimingModel,
    master_seed: int,
    rep: int,
    _calc: Optional[BlrmCalculator] = None,
) -> TrialResult:
    """One replication with streams derived from (master_seed, rep)."""
    rng = derived_rng(master_seed, rep, "trial")
    assign = CounterUniform(f"{master_seed}:{rep}:assign")
    return run_trial(design, truth, timing, rng, assign, _calc=_calc)


_WORKER_STATE: dict = {}


def _worker_init(design, truth, timing, master_seed):
    calc = BlrmCalculator(design.blrm) if design.engine == "blrm" else None
    _WORKER_STATE.update(
        design=design, truth=truth, timing=timing, seed=master_seed, calc=calc
    )


def _worker_chunk(rep_range: tuple[int, int]) -> list[tuple]:
    s = _WORKER_STATE
    out = []
    for rep in range(*rep_range):
        res = run_replication(s["design"], s["truth"], s["timing"], s["seed"], rep, s["calc"])
        out.append(trial_metrics(res, s["design"], s["truth"]))
    return out


def replicate(
    design: DesignConfig,
    truth: ScenarioTruth,
    timing: TimingModel,
    reps: int,
    master_seed: int = 0,
    parallelism: int = 1,
    trace_path=None,
) -> OcReport:
    """Aggregate operating characteristics over independent replications.

    Per-replication seeds depend only on (master_seed, rep index), and the
    metric matrix is assembled in rep order, so the report is identical for
    any ``parallelism``.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if parallelism <= 1 or reps < 4 * parallelism:
        _worker_init(design, truth, timing, master_seed)
        rows = _worker_chunk((0, reps))
    else:
        chunk = max(1, math.ceil(reps / (parallelism * 8)))
        ranges = [(i, min(i + chunk, reps)) for i in range(0, reps, chunk)]
        ctx = get_context("fork")
        with ctx.Pool(
            parallelism, initializer=_worker_init,
            initargs=(design, truth, timing, master_seed),
        ) as pool:
            rows = [m for part in pool.map(_worker_chunk, ranges) for m in part]
        _WORKER_STATE.clear()
    metrics = np.asarray(rows, dtype=float)
    if trace_path is not None:
        with open(trace_path, "w") as fh:
            for rep, row in enumerate(rows):
                record = {"rep": rep, **dict(zip(_METRIC_FIELDS, row))}
                fh.write(json.dumps(record, allow_nan=True) + "\n")
    return report_from_metrics(metrics, design, truth, reps, master_seed)
