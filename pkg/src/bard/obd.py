"""End-of-trial optimal-dose selection from the combined two-arm data:
admissibility gating plus the efficacy-margin and utility criteria."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .stats import (
    BetaPosterior,
    DirichletPosterior,
    beta_lower_tail,
    beta_tail,
    dirichlet_mean_utility,
)

ARM_LOW, ARM_HIGH = 0, 1


@dataclass(frozen=True)
class UtilityTable:
    """Scores for (toxicity, no efficacy), (no toxicity, no efficacy),
    (toxicity, efficacy), (no toxicity, efficacy)."""

    u1: float = 0.0
    u2: float = 30.0
    u3: float = 50.0
    u4: float = 100.0

    def __post_init__(self):
        if self.u1 > self.u2 or self.u3 > self.u4:
            raise ValueError("toxicity must not increase desirability at fixed efficacy")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.u1, self.u2, self.u3, self.u4)


@dataclass(frozen=True)
class GatingParams:
    phi_t: float = 0.30
    phi_e: float = 0.20
    c_t: float = 0.90
    c_e: float = 0.95
    delta: float = 0.05
    # the margin criterion as a noninferiority rule (select the lower dose
    # when its efficacy is no more than delta worse); the literal
    # "better by at least delta" form is available for comparison
    noninferiority_margin: bool = True

    def __post_init__(self):
        for name in ("phi_t", "phi_e", "c_t", "c_e", "delta"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")


def admissible(
    tox: tuple[int, int], eff: tuple[int, int], gating: GatingParams
) -> tuple[bool, bool]:
    """(safe, effective) flags for one dose under uniform-prior beta models.

    Safe when Pr(p_T > phi_t) <= c_t; effective when Pr(p_E < phi_e) <= c_e.
    """
    y_t, n_t = tox
    y_e, n_e = eff
    safe = beta_tail(BetaPosterior(y_t + 1.0, n_t - y_t + 1.0), gating.phi_t) <= gating.c_t
    effective = (
        beta_lower_tail(BetaPosterior(y_e + 1.0, n_e - y_e + 1.0), gating.phi_e)
        <= gating.c_e
    )
    return safe, effective


def gate_pair(
    low_tox: tuple[int, int],
    low_eff: tuple[int, int],
    high_tox: tuple[int, int],
    high_eff: tuple[int, int],
    gating: GatingParams,
) -> tuple[tuple[bool, bool], tuple[bool, bool]]:
    """Admissibility for both arms, with an isotonic safety adjustment.

    When the observed toxicity order is inverted (the lower dose looks more
    toxic than the higher one), the toxicity data of the two arms are pooled
    and both safety tails are evaluated from the pooled posterior, the
    two-point analogue of isotonic regression.
    """
    safe_low, eff_low = admissible(low_tox, low_eff, gating)
    safe_high, eff_high = admissible(high_tox, high_eff, gating)
    if low_tox[1] > 0 and high_tox[1] > 0:
        if low_tox[0] / low_tox[1] > high_tox[0] / high_tox[1]:
            y = low_tox[0] + high_tox[0]
            n = low_tox[1] + high_tox[1]
            pooled_safe = (
                beta_tail(BetaPosterior(y + 1.0, n - y + 1.0), gating.phi_t)
                <= gating.c_t
            )
            safe_low = safe_high = pooled_safe
    return (safe_low, eff_low), (safe_high, eff_high)


def select_obd_margin(
    p_eff_low: float,
    p_eff_high: float,
    delta: float,
    low_admissible: bool,
    high_admissible: bool,
    noninferiority: bool = True,
    tie_rng=None,
) -> Optional[int]:
    """Efficacy-margin criterion over the admissible arms.

    With both arms admissible the lower dose is selected when its efficacy
    is noninferior (difference above -delta). A difference of exactly
    -delta sits on the decision boundary; with equal arm sizes this happens
    often, and the boundary mass is split evenly (via ``tie_rng`` when
    given, else toward the higher dose) rather than left to float rounding.
    The literal superiority form (lower dose needs +delta) is kept behind
    the flag. One admissible arm is selected outright; none yields no
    selection.
    """
    if not 0.0 <= p_eff_low <= 1.0 or not 0.0 <= p_eff_high <= 1.0:
        raise ValueError("efficacy estimates must lie in [0, 1]")
    if low_admissible and high_admissible:
        margin = delta if noninferiority else -delta
        gap = p_eff_low - p_eff_high + margin
        if abs(gap) < 1e-9:  # decision boundary
            if not noninferiority:
                return ARM_LOW
            if tie_rng is None:
                return ARM_HIGH
            return ARM_LOW if tie_rng.random() < 0.5 else ARM_HIGH
        return ARM_LOW if gap > 0 else ARM_HIGH
    if low_admissible:
        return ARM_LOW
    if high_admissible:
        return ARM_HIGH
    return None


def select_obd_utility(
    counts_low: Sequence[int],
    counts_high: Sequence[int],
    table: UtilityTable,
    prior: Sequence[float],
    low_admissible: bool,
    high_admissible: bool,
    tie_rng=None,
) -> Optional[int]:
    """Posterior-mean-utility criterion.

    Counts are per-arm patient totals in the four outcome cells in the
    order of the utility table. Exact posterior-mean ties break toward the
    lower dose, or split evenly when a tie stream is supplied (the
    operating-characteristics replicator does, so equal-arm boundary mass
    is not resolved one-sidedly).
    """
    if any(c < 0 for c in counts_low) or any(c < 0 for c in counts_high):
        raise ValueError("outcome counts must be nonnegative")
    if not low_admissible and not high_admissible:
        return None
    if low_admissible and not high_admissible:
        return ARM_LOW
    if high_admissible and not low_admissible:
        return ARM_HIGH
    u = table.as_tuple()
    u_low = dirichlet_mean_utility(DirichletPosterior.from_counts(prior, counts_low), u)
    u_high = dirichlet_mean_utility(DirichletPosterior.from_counts(prior, counts_high), u)
    if abs(u_low - u_high) < 1e-9 and tie_rng is not None:
        return ARM_LOW if tie_rng.random() < 0.5 else ARM_HIGH
    return ARM_LOW if u_low >= u_high else ARM_HIGH


def outcome_counts(n: int, n_tox: int, n_eff: int, n_tox_eff: int) -> tuple[int, int, int, int]:
    """Four-cell outcome counts from margins and the joint toxicity+efficacy count."""
    n1 = n_tox - n_tox_eff        # toxicity, no efficacy
    n3 = n_tox_eff                # toxicity, efficacy
    n4 = n_eff - n_tox_eff        # no toxicity, efficacy
    n2 = n - n1 - n3 - n4         # no toxicity, no efficacy
    if min(n1, n2, n3, n4) < 0:
        raise ValueError("inconsistent outcome margins")
    return n1, n2, n3, n4


def true_utility(p_t: float, p_e: float, table: UtilityTable) -> float:
    """Expected utility of a dose with the given true rates, toxicity and
    efficacy independent."""
    if not 0.0 <= p_t <= 1.0 or not 0.0 <= p_e <= 1.0:
        raise ValueError("probabilities must lie in [0, 1]")
    u1, u2, u3, u4 = table.as_tuple()
    return (
        u1 * p_t * (1 - p_e)
        + u2 * (1 - p_t) * (1 - p_e)
        + u3 * p_t * p_e
        + u4 * (1 - p_t) * p_e
    )
