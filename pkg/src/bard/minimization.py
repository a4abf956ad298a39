"""Conditional covariate-adaptive randomization between two dose arms.

Counts are seeded with the non-randomized stage-1 patients at the two arms,
so stage-2 assignments actively remove whatever imbalance stage 1 left
behind. With an empty seed this is classic marginal minimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

LOW, HIGH = 0, 1


@dataclass(frozen=True)
class CovariateSpec:
    """Categorical prognostic factors to balance: one level count per factor."""

    n_levels: tuple[int, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.n_levels or any(l < 2 for l in self.n_levels):
            raise ValueError("every factor needs at least two levels")
        if not self.names:
            object.__setattr__(
                self, "names", tuple(f"X{k + 1}" for k in range(len(self.n_levels)))
            )
        if len(self.names) != len(self.n_levels):
            raise ValueError("names and n_levels must have equal length")

    @property
    def n_factors(self) -> int:
        return len(self.n_levels)

    def check(self, v: Sequence[int]) -> None:
        if len(v) < self.n_factors:
            raise ValueError("patient is missing a covariate level")
        for k in range(self.n_factors):
            if not 0 <= v[k] < self.n_levels[k]:
                raise ValueError(f"level {v[k]} out of range for factor {self.names[k]}")


@dataclass
class ArmCounts:
    spec: CovariateSpec
    counts: list = field(default_factory=list)  # [arm][factor][level]
    totals: list = field(default_factory=lambda: [0, 0])

    def __post_init__(self):
        if not self.counts:
            self.counts = [
                [[0] * l for l in self.spec.n_levels] for _ in (LOW, HIGH)
            ]

    def add(self, arm: int, v: Sequence[int]) -> None:
        self.spec.check(v)
        for k in range(self.spec.n_factors):
            self.counts[arm][k][v[k]] += 1
        self.totals[arm] += 1

    def level_count(self, arm: int, factor: int, level: int) -> int:
        return self.counts[arm][factor][level]

    def copy(self) -> "ArmCounts":
        return ArmCounts(
            self.spec,
            [[list(lv) for lv in arm] for arm in self.counts],
            list(self.totals),
        )


def seed_from_stage1(
    spec: CovariateSpec,
    low_patients: Iterable[Sequence[int]],
    high_patients: Iterable[Sequence[int]],
    eligible=None,
) -> ArmCounts:
    """Counts initialized from the eligible stage-1 patients at each arm."""
    counts = ArmCounts(spec)
    for arm, patients in ((LOW, low_patients), (HIGH, high_patients)):
        for v in patients:
            if eligible is not None and not eligible(v):
                continue
            counts.add(arm, v)
    return counts


def imbalance_omega(counts: ArmCounts, v: Sequence[int], arm: int) -> int:
    """Marginal imbalance index after hypothetically assigning the patient.

    Sum over balanced factors of |n_low(X_k = v_k) - n_high(X_k = v_k)|,
    evaluated with the patient added to ``arm``.
    """
    counts.spec.check(v)
    omega = 0
    for k in range(counts.spec.n_factors):
        lo = counts.counts[LOW][k][v[k]] + (1 if arm == LOW else 0)
        hi = counts.counts[HIGH][k][v[k]] + (1 if arm == HIGH else 0)
        omega += abs(lo - hi)
    return omega


def randomize(counts: ArmCounts, v: Sequence[int], r: float, rng) -> int:
    """Assign to the arm minimizing the imbalance index with probability r
    (fair coin on ties), then update the counts."""
    if not 0.5 < r <= 1.0:
        raise ValueError("r must lie in (0.5, 1]")
    w_low = imbalance_omega(counts, v, LOW)
    w_high = imbalance_omega(counts, v, HIGH)
    u = rng.random()
    if w_low == w_high:
        arm = LOW if u < 0.5 else HIGH
    elif w_low < w_high:
        arm = LOW if u < r else HIGH
    else:
        arm = HIGH if u < r else LOW
    counts.add(arm, v)
    return arm


def stage2_quota(n2: int, n1_low: int, n1_high: int) -> int:
    """Fresh stage-2 patients still to enroll; zero when stage 1 already
    met the target."""
    if n2 < 0:
        raise ValueError("n2 must be nonnegative")
    return max(0, n2 - n1_low - n1_high)
