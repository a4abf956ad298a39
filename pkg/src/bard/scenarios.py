"""Simulation ground truth: per-dose DLT rates plus a covariate-logistic
response model, with the named scenario presets used in the numerical
studies (eight five-dose curves s1..s8 and four three-dose curves
s3d1..s3d4)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence


def _logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass(frozen=True)
class ScenarioTruth:
    name: str
    dlt_rates: tuple[float, ...]
    beta0: tuple[float, ...]                      # per-dose response intercepts
    cov_betas: tuple[float, float, float] = (1.7, -1.5, 0.4)
    cov_prevalence: tuple[float, ...] = (0.5, 0.5, 0.5)
    true_obd: Optional[int] = None                # 0-based dose index
    true_mtd: Optional[int] = None

    def __post_init__(self):
        if len(self.beta0) != len(self.dlt_rates):
            raise ValueError("beta0 must have one intercept per dose")
        if any(not 0.0 <= p <= 1.0 for p in self.dlt_rates):
            raise ValueError("DLT rates must lie in [0, 1]")
        if len(self.cov_prevalence) != len(self.cov_betas):
            raise ValueError("one prevalence per covariate required")

    @property
    def n_doses(self) -> int:
        return len(self.dlt_rates)


def efficacy_prob(truth: ScenarioTruth, j: int, v: Sequence[int]) -> float:
    """Response probability at dose j for a patient with binary covariates v."""
    z = truth.beta0[j]
    for beta, vk in zip(truth.cov_betas, v):
        z += beta * vk
    return _logistic(z)


def marginal_efficacy(truth: ScenarioTruth, j: int) -> float:
    """Response rate at dose j averaged over the covariate distribution."""
    total = 0.0
    K = len(truth.cov_betas)
    for combo in itertools.product((0, 1), repeat=K):
        weight = 1.0
        for vk, prev in zip(combo, truth.cov_prevalence):
            weight *= prev if vk == 1 else 1.0 - prev
        total += weight * efficacy_prob(truth, j, combo)
    return total


def sample_patient(truth: ScenarioTruth, j: int, rng) -> tuple[tuple[int, ...], bool, bool]:
    """Covariates, DLT outcome and response outcome for one patient at dose j.

    Covariates are independent Bernoulli draws; DLT and response are
    independent given dose and covariates. ``rng`` needs only a
    ``random()`` method.
    """
    v = tuple(1 if rng.random() < prev else 0 for prev in truth.cov_prevalence)
    dlt = rng.random() < truth.dlt_rates[j]
    response = rng.random() < efficacy_prob(truth, j, v)
    return v, dlt, response


_FIVE_DOSE = {
    # name: (DLT rates, response intercepts, true OBD index, true MTD index)
    "s1": ((0.12, 0.25, 0.42, 0.49, 0.55), (-2.197, -1.099, -0.619, -0.201, 0.201), 1, 1),
    "s2": ((0.04, 0.12, 0.25, 0.43, 0.63), (-2.442, -2.197, -1.099, -0.619, -0.201), 2, 2),
    "s3": ((0.02, 0.06, 0.10, 0.25, 0.40), (-2.944, -2.442, -2.197, -1.099, -0.619), 3, 3),
    "s4": ((0.02, 0.05, 0.08, 0.11, 0.25), (-3.892, -2.944, -2.442, -2.197, -1.099), 4, 4),
    "s5": ((0.12, 0.25, 0.42, 0.49, 0.55), (-1.099, -1.099, -1.046, -1.046, -1.046), 0, 1),
    "s6": ((0.04, 0.12, 0.25, 0.43, 0.63), (-2.197, -1.099, -1.099, -1.046, -1.046), 1, 2),
    "s7": ((0.02, 0.06, 0.10, 0.25, 0.40), (-2.442, -2.197, -1.099, -1.099, -1.046), 2, 3),
    "s8": ((0.02, 0.05, 0.08, 0.11, 0.25), (-2.944, -2.442, -2.197, -1.099, -1.099), 3, 4),
}

_THREE_DOSE = {
    "s3d1": ((0.12, 0.25, 0.42), (-2.197, -1.099, -0.619), 1, 1),
    "s3d2": ((0.04, 0.12, 0.25), (-2.442, -2.197, -1.099), 2, 2),
    "s3d3": ((0.12, 0.25, 0.42), (-1.099, -1.099, -1.046), 0, 1),
    "s3d4": ((0.04, 0.12, 0.25), (-2.197, -1.099, -1.099), 1, 2),
}

PRESETS: dict[str, ScenarioTruth] = {
    name: ScenarioTruth(name, rates, b0, true_obd=obd, true_mtd=mtd)
    for name, (rates, b0, obd, mtd) in {**_FIVE_DOSE, **_THREE_DOSE}.items()
}


def get_scenario(name: str) -> ScenarioTruth:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown scenario {name!r}; presets: {', '.join(sorted(PRESETS))}"
        ) from None
