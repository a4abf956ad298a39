"""Interval-based stage-1 escalation engine with backfill-aware reconciliation.

Decisions compare the observed DLT rate at the current dose against the
escalation/de-escalation boundaries (lambda_e, lambda_d]. When backfill data
at a lower dose contradicts the escalation data, pooled rates across the
conflicting range replace the single-dose rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .stats import BetaPosterior, beta_tail, pava
from .tally import Decision, DecisionDeferred, DoseTally


def boin_boundaries(phi: float) -> tuple[float, float]:
    """Optimal-interval boundaries for target DLT rate phi.

    Uses phi1 = 0.6 * phi and phi2 = 1.4 * phi; for phi = 0.25 this yields
    (0.197, 0.298) to three decimals.
    """
    if not 0.0 < phi < 1.0:
        raise ValueError("phi must lie strictly between 0 and 1")
    phi1, phi2 = 0.6 * phi, 1.4 * phi
    lambda_e = math.log((1 - phi1) / (1 - phi)) / math.log(
        phi * (1 - phi1) / (phi1 * (1 - phi))
    )
    lambda_d = math.log((1 - phi) / (1 - phi2)) / math.log(
        phi2 * (1 - phi) / (phi * (1 - phi2))
    )
    return lambda_e, lambda_d


@dataclass(frozen=True)
class BoinParams:
    phi: float = 0.25
    lambda_e: float = 0.0
    lambda_d: float = 0.0
    elimination_cutoff: float = 0.95
    # the overdose rule needs a minimal sample before it can fire (standard
    # interval-design convention; keeps 2-of-2 from eliminating a dose)
    elimination_min_n: int = 3
    n_stop: int = 9
    max_n1: int = 30

    def __post_init__(self):
        if self.lambda_e == 0.0 and self.lambda_d == 0.0:
            le, ld = boin_boundaries(self.phi)
            object.__setattr__(self, "lambda_e", le)
            object.__setattr__(self, "lambda_d", ld)
        if not 0.0 < self.lambda_e < self.phi < self.lambda_d < 1.0:
            raise ValueError("boundaries must satisfy 0 < lambda_e < phi < lambda_d < 1")
        if not 0.5 < self.elimination_cutoff < 1.0:
            raise ValueError("elimination cutoff must lie in (0.5, 1)")


def _interval_action(phat: float, params: BoinParams) -> int:
    """Raw boundary comparison: 0 escalate, 1 stay, 2 de-escalate."""
    if phat <= params.lambda_e:
        return 0
    if phat > params.lambda_d:
        return 2
    return 1


def escalation_decision(tally: DoseTally, c: int, params: BoinParams) -> Decision:
    """Boundary decision at the current dose.

    Escalation from the top dose and de-escalation from the lowest dose
    both resolve to Stay.
    """
    action = _interval_action(tally.rate(c), params)
    if action == 0:
        return Decision.STAY if c == tally.n_doses - 1 else Decision.ESCALATE
    if action == 2:
        return Decision.STAY if c == 0 else Decision.DE_ESCALATE
    return Decision.STAY


def overdose_tail(dlt: int, n: int, phi: float) -> float:
    """Pr(p > phi) under the uniform-prior beta-binomial posterior."""
    return beta_tail(BetaPosterior(dlt + 1.0, n - dlt + 1.0), phi)


def eliminate_overdoses(tally: DoseTally, params: BoinParams) -> list[bool]:
    """Elimination flags after applying the overdose rule to current data.

    A dose with at least ``elimination_min_n`` assessed patients whose
    posterior overdose probability exceeds the cutoff is eliminated together
    with every higher dose. Existing flags are kept: elimination is
    permanent.
    """
    flags = list(tally.eliminated)
    for j in range(tally.n_doses):
        if flags[j] or tally.n[j] < params.elimination_min_n:
            continue
        if overdose_tail(tally.dlt[j], tally.n[j], params.phi) > params.elimination_cutoff:
            flags[j] = True
    # upward closure
    for j in range(1, tally.n_doses):
        flags[j] = flags[j] or flags[j - 1]
    return flags


def elimination_min_dlt(
    n: int, phi: float, cutoff: float, min_n: int = 3
) -> Optional[int]:
    """Smallest DLT count that eliminates a dose with n assessed patients."""
    if n < min_n:
        return None
    for y in range(n + 1):
        if overdose_tail(y, n, phi) > cutoff:
            return y
    return None


def pooled_rate(tally: DoseTally, b_star: int, j: int) -> float:
    """Pooled DLT rate over the dose range [b_star, j]."""
    if b_star > j:
        raise ValueError("b_star must not exceed j")
    num = sum(tally.dlt[b_star : j + 1])
    den = sum(tally.n[b_star : j + 1])
    if den == 0:
        raise DecisionDeferred("no completed assessments in the pooled range")
    return num / den


def conflicting_doses(tally: DoseTally, c: int, params: BoinParams) -> list[int]:
    """Backfilled doses below c whose observed rate conflicts with dose c.

    A conflict exists when the lower dose's rate implies a stricter action
    than the current dose's rate, and also when both imply de-escalation.
    """
    if tally.n[c] == 0:
        return []
    ac = _interval_action(tally.rate(c), params)
    out = []
    for b in range(c):
        if tally.backfilled_assessed[b] == 0 or tally.n[b] == 0:
            continue
        ab = _interval_action(tally.rate(b), params)
        if ab > ac or (ab == 2 and ac == 2):
            out.append(b)
    return out


def reconciled_decision(
    tally: DoseTally, c: int, params: BoinParams
) -> tuple[Decision, int]:
    """Decision and target dose after reconciling backfill conflicts.

    Without a conflict this is the plain boundary decision. With conflicts,
    b_star is the lowest conflicting dose and pooled rates from b_star
    upward drive the decision; a pooled de-escalation moves to the highest
    dose in [b_star, c-1] whose pooled rate is tolerable, else to
    b_star - 1. A target of -1 means every administered dose is suspect
    (the caller decides trial-level handling).
    """
    conflicts = conflicting_doses(tally, c, params)
    if not conflicts:
        decision = escalation_decision(tally, c, params)
        if decision == Decision.ESCALATE:
            return decision, c + 1
        if decision == Decision.DE_ESCALATE:
            return decision, c - 1
        return decision, c
    b_star = conflicts[0]
    q_c = pooled_rate(tally, b_star, c)
    if q_c <= params.lambda_e:
        if c == tally.n_doses - 1:
            return Decision.STAY, c
        return Decision.ESCALATE, c + 1
    if q_c > params.lambda_d:
        for j in range(c - 1, b_star - 1, -1):
            if pooled_rate(tally, b_star, j) <= params.lambda_d:
                return Decision.DE_ESCALATE, j
        return Decision.DE_ESCALATE, b_star - 1
    return Decision.STAY, c


def select_mtd_boin(tally: DoseTally, params: BoinParams) -> Optional[int]:
    """Isotonic-regression MTD: the non-eliminated dose whose fitted DLT
    rate is closest to phi.

    The fit follows the reference convention for interval designs: posterior
    means (y + 0.05) / (n + 0.1) pooled under inverse-posterior-variance
    weights, with equidistant fits breaking toward the lower dose. Doses
    without completed assessments are excluded.
    """
    idx = [
        j
        for j in range(tally.n_doses)
        if not tally.eliminated[j] and tally.n[j] > 0
    ]
    if not idx:
        return None
    phat = np.array([(tally.dlt[j] + 0.05) / (tally.n[j] + 0.1) for j in idx])
    var = np.array(
        [
            (tally.dlt[j] + 0.05)
            * (tally.n[j] - tally.dlt[j] + 0.05)
            / ((tally.n[j] + 0.1) ** 2 * (tally.n[j] + 1.1))
            for j in idx
        ]
    )
    fit = pava(phat, 1.0 / var)
    fit = fit + np.arange(1, len(idx) + 1) * 1e-10  # ties go to the lower dose
    dist = np.abs(fit - params.phi)
    return idx[int(np.argmin(dist))]


def decision_table(params: BoinParams, n_max: int) -> list[dict]:
    """Per-n action thresholds: escalate if DLTs <= escalate_max, de-escalate
    if DLTs >= deescalate_min, eliminate if DLTs >= eliminate_min."""
    rows = []
    for n in range(1, n_max + 1):
        esc_max = math.floor(params.lambda_e * n + 1e-12)
        de_min = math.floor(params.lambda_d * n + 1e-12) + 1
        elim = elimination_min_dlt(
            n, params.phi, params.elimination_cutoff, params.elimination_min_n
        )
        rows.append(
            {
                "n": n,
                "escalate_max_dlt": esc_max,
                "deescalate_min_dlt": de_min,
                "eliminate_min_dlt": elim,
            }
        )
    return rows
