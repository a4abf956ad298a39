import math
import random

import pytest

from bard.obd import UtilityTable, true_utility
from bard.scenarios import (
    PRESETS,
    ScenarioTruth,
    efficacy_prob,
    get_scenario,
    marginal_efficacy,
    sample_patient,
)

UTIL = UtilityTable()

# response and utility rows for every preset scenario, dose by dose
EXPECTED = {
    "s1": ((0.181, 0.349, 0.439, 0.519, 0.596), (38.6, 45.2, 44.4, 46.6, 48.7)),
    "s2": ((0.152, 0.181, 0.349, 0.439, 0.519), (39.3, 38.6, 45.2, 44.0, 40.9)),
    "s3": ((0.103, 0.152, 0.181, 0.349, 0.439), (36.6, 38.6, 39.3, 45.2, 45.2)),
    "s4": ((0.046, 0.103, 0.152, 0.181, 0.349), (32.6, 35.6, 38.0, 38.9, 45.2)),
    "s5": ((0.349, 0.349, 0.359, 0.359, 0.359), (50.0, 45.2, 39.5, 36.9, 34.7)),
    "s6": ((0.181, 0.349, 0.349, 0.359, 0.359), (41.3, 50.0, 45.2, 39.1, 31.7)),
    "s7": ((0.152, 0.181, 0.349, 0.349, 0.359), (40.0, 40.6, 50.8, 45.2, 40.3)),
    "s8": ((0.103, 0.152, 0.181, 0.349, 0.349), (36.6, 39.0, 39.9, 50.4, 45.2)),
    "s3d1": ((0.181, 0.349, 0.439), (38.6, 45.2, 44.4)),
    "s3d2": ((0.152, 0.181, 0.349), (39.3, 38.6, 45.2)),
    "s3d3": ((0.349, 0.349, 0.359), (50.0, 45.2, 39.5)),
    "s3d4": ((0.181, 0.349, 0.349), (41.3, 50.0, 45.2)),
}


def test_every_preset_reproduces_response_and_utility_rows():
    for name, (eff_row, util_row) in EXPECTED.items():
        truth = get_scenario(name)
        for j in range(truth.n_doses):
            eff = marginal_efficacy(truth, j)
            assert eff == pytest.approx(eff_row[j], abs=1e-3), (name, j)
            util = true_utility(truth.dlt_rates[j], eff, UTIL)
            assert util == pytest.approx(util_row[j], abs=0.1), (name, j)


def test_true_obd_is_best_admissible_utility():
    # the annotated target dose maximizes true utility among doses at or
    # below the true MTD
    for name, truth in PRESETS.items():
        utils = [
            true_utility(truth.dlt_rates[j], marginal_efficacy(truth, j), UTIL)
            for j in range(truth.n_doses)
        ]
        candidates = range(truth.true_mtd + 1)
        assert truth.true_obd == max(candidates, key=lambda j: utils[j]), name


def test_true_mtd_closest_to_quarter():
    for name, truth in PRESETS.items():
        dist = [abs(r - 0.25) for r in truth.dlt_rates]
        assert dist[truth.true_mtd] == min(dist), name


def test_efficacy_prob_examples():
    s1 = get_scenario("s1")
    assert efficacy_prob(s1, 0, (0, 0, 0)) == pytest.approx(
        1 / (1 + math.exp(2.197)), abs=1e-9
    )
    assert efficacy_prob(s1, 0, (1, 0, 1)) == pytest.approx(
        1 / (1 + math.exp(0.097)), abs=1e-9
    )
    far = ScenarioTruth("x", (0.1,), (-50.0,))
    assert efficacy_prob(far, 0, (0, 0, 0)) < 1e-10


def test_marginal_with_degenerate_prevalence():
    truth = ScenarioTruth("x", (0.1, 0.2), (-1.0, 0.0), cov_prevalence=(0.0, 0.0, 0.0))
    assert marginal_efficacy(truth, 0) == pytest.approx(efficacy_prob(truth, 0, (0, 0, 0)))


def test_sample_patient_rates():
    truth = get_scenario("s1")
    rng = random.Random(99)
    n = 100_000
    dlt_count = resp_count = 0
    for _ in range(n):
        _, dlt, resp = sample_patient(truth, 0, rng)
        dlt_count += dlt
        resp_count += resp
    assert dlt_count / n == pytest.approx(0.12, abs=0.004)
    assert resp_count / n == pytest.approx(0.181, abs=0.005)


def test_sample_patient_zero_rate():
    truth = ScenarioTruth("x", (0.0,), (0.0,))
    rng = random.Random(1)
    assert not any(sample_patient(truth, 0, rng)[1] for _ in range(1000))


def test_unknown_scenario():
    with pytest.raises(KeyError):
        get_scenario("nope")
