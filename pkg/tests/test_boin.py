import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bard.boin import (
    BoinParams,
    boin_boundaries,
    conflicting_doses,
    decision_table,
    eliminate_overdoses,
    escalation_decision,
    pooled_rate,
    reconciled_decision,
    select_mtd_boin,
)
from bard.tally import Decision, DecisionDeferred, DoseTally

PARAMS = BoinParams(phi=0.25)


def make_tally(n, dlt, backfilled=None, eliminated=None):
    J = len(n)
    return DoseTally(
        J,
        list(n),
        list(dlt),
        list(n),
        list(backfilled) if backfilled else [0] * J,
        list(eliminated) if eliminated else [False] * J,
    )


def test_boundaries_reference_values():
    le, ld = boin_boundaries(0.25)
    assert round(le, 3) == 0.197
    assert round(ld, 3) == 0.298
    # closed form with phi1 = 0.15, phi2 = 0.35
    expect_le = math.log(0.85 / 0.75) / math.log((0.25 * 0.85) / (0.15 * 0.75))
    expect_ld = math.log(0.75 / 0.65) / math.log((0.35 * 0.75) / (0.25 * 0.65))
    assert le == pytest.approx(expect_le, abs=1e-12)
    assert ld == pytest.approx(expect_ld, abs=1e-12)


def test_boundaries_bracket_target():
    for phi in (0.1, 0.2, 0.25, 0.3, 0.35):
        le, ld = boin_boundaries(phi)
        assert le < phi < ld


def test_escalation_decision_examples():
    t = make_tally([3, 0, 0], [0, 0, 0])
    assert escalation_decision(t, 0, PARAMS) == Decision.ESCALATE
    t = make_tally([3, 3, 0], [0, 1, 0])
    assert escalation_decision(t, 1, PARAMS) == Decision.DE_ESCALATE
    t = make_tally([3, 6, 0], [0, 1, 0])
    assert escalation_decision(t, 1, PARAMS) == Decision.ESCALATE


def test_escalation_boundary_handling():
    # escalate signal at the top dose resolves to stay
    t = make_tally([3, 3], [0, 0])
    assert escalation_decision(t, 1, PARAMS) == Decision.STAY
    # de-escalate signal at the lowest dose resolves to stay
    t = make_tally([3], [2])
    assert escalation_decision(t, 0, PARAMS) == Decision.STAY


def test_escalation_requires_data():
    t = make_tally([0, 0], [0, 0])
    with pytest.raises(DecisionDeferred):
        escalation_decision(t, 0, PARAMS)


def test_decision_table_matches_brute_force():
    # decisions for all (y, n) with n <= 12 equal direct boundary comparison
    for n in range(1, 13):
        for y in range(n + 1):
            t = make_tally([3, n, 3], [0, y, 0])
            got = escalation_decision(t, 1, PARAMS)
            phat = y / n
            if phat <= PARAMS.lambda_e:
                expect = Decision.ESCALATE
            elif phat > PARAMS.lambda_d:
                expect = Decision.DE_ESCALATE
            else:
                expect = Decision.STAY
            assert got == expect, (y, n)


def test_eliminate_overdoses_examples():
    t = make_tally([3, 3, 0], [0, 3, 0])
    flags = eliminate_overdoses(t, PARAMS)
    assert flags == [False, True, True]  # upward closed
    t = make_tally([3, 3, 0], [0, 2, 0])
    assert eliminate_overdoses(t, PARAMS) == [False, False, False]
    t = make_tally([0, 0, 0], [0, 0, 0])
    assert eliminate_overdoses(t, PARAMS) == [False, False, False]


def test_eliminate_needs_minimum_sample():
    # 2-of-2 does not trigger the overdose rule
    t = make_tally([2, 0], [2, 0])
    assert eliminate_overdoses(t, PARAMS) == [False, False]


def test_elimination_is_sticky():
    t = make_tally([3, 3], [0, 0], eliminated=[False, True])
    assert eliminate_overdoses(t, PARAMS) == [False, True]


@given(st.integers(3, 12), st.data())
@settings(max_examples=80, deadline=None)
def test_elimination_monotone(n, data):
    y = data.draw(st.integers(0, n))
    base = eliminate_overdoses(make_tally([n], [y]), PARAMS)[0]
    if base:
        assert eliminate_overdoses(make_tally([n], [min(y + 1, n)]), PARAMS)[0]
        assert eliminate_overdoses(make_tally([n + 1], [y + 1]), PARAMS)[0]


def test_pooled_rate_examples():
    t = make_tally([3, 12, 6], [0, 4, 1])
    assert pooled_rate(t, 1, 2) == pytest.approx(5 / 18)
    assert pooled_rate(t, 2, 2) == pytest.approx(1 / 6)
    t = make_tally([3, 12, 6], [0, 5, 1])
    assert pooled_rate(t, 1, 2) == pytest.approx(6 / 18)
    with pytest.raises(DecisionDeferred):
        pooled_rate(make_tally([0, 0], [0, 0]), 0, 1)


def test_reconciled_decision_examples():
    # backfill at dose 2 contradicts escalation data at dose 3
    t = make_tally([6, 12, 6], [0, 4, 1], backfilled=[0, 9, 0])
    decision, target = reconciled_decision(t, 2, PARAMS)
    assert decision == Decision.STAY and target == 2  # pooled 5/18 in the window
    t = make_tally([6, 12, 6], [0, 5, 1], backfilled=[0, 9, 0])
    decision, target = reconciled_decision(t, 2, PARAMS)
    assert decision == Decision.DE_ESCALATE and target == 0  # pooled rates too high


def test_reconciled_no_conflict_falls_back():
    t = make_tally([6, 6, 6], [0, 1, 1], backfilled=[3, 0, 0])
    # dose 1 backfill shows 0/6: escalation signal, no conflict
    decision, target = reconciled_decision(t, 2, PARAMS)
    assert decision == escalation_decision(t, 2, PARAMS)


def test_reconciled_all_suspect_signal():
    # conflict at the lowest dose with no tolerable pooled rate
    t = make_tally([9, 6], [4, 3], backfilled=[6, 0])
    decision, target = reconciled_decision(t, 1, PARAMS)
    assert decision == Decision.DE_ESCALATE
    assert target == -1


def test_conflict_cells():
    # stay signal below an escalate signal is a conflict
    t = make_tally([9, 3], [2, 0], backfilled=[6, 0])
    assert conflicting_doses(t, 1, PARAMS) == [0]
    # de-escalate below any signal is a conflict, including de-escalate
    t = make_tally([9, 3], [4, 2], backfilled=[6, 0])
    assert conflicting_doses(t, 1, PARAMS) == [0]
    # escalate signal below is never a conflict
    t = make_tally([9, 3], [1, 2], backfilled=[6, 0])
    assert conflicting_doses(t, 1, PARAMS) == []
    # without backfill data there is no conflict
    t = make_tally([9, 3], [4, 0], backfilled=[0, 0])
    assert conflicting_doses(t, 1, PARAMS) == []


def test_reconciled_equals_plain_without_conflict():
    rngs = [(y1, n1, y2, n2) for n1 in (3, 6) for y1 in range(n1 + 1)
            for n2 in (3, 6) for y2 in range(n2 + 1)]
    for y1, n1, y2, n2 in rngs:
        t = make_tally([n1, n2], [y1, y2], backfilled=[0, 0])
        if n2 == 0:
            continue
        decision, _ = reconciled_decision(t, 1, PARAMS)
        assert decision == escalation_decision(t, 1, PARAMS)


def test_select_mtd_examples():
    t = make_tally([10, 10, 10], [1, 2, 4])  # observed 0.10, 0.20, 0.40
    assert select_mtd_boin(t, PARAMS) == 1
    # a pooled block sitting below the target selects its highest dose
    t = make_tally([10, 10, 10], [1, 3, 2])
    assert select_mtd_boin(t, PARAMS) == 2
    # fits symmetric around the target break toward the lower dose
    t = make_tally([20, 20], [4, 6])  # 0.20 and 0.30 straddle 0.25
    assert select_mtd_boin(t, PARAMS) == 0
    # all doses eliminated: nothing to select
    t = make_tally([3, 3], [3, 3], eliminated=[True, True])
    assert select_mtd_boin(t, PARAMS) is None


def test_select_mtd_skips_eliminated_and_empty():
    t = make_tally([6, 6, 0], [1, 5, 0], eliminated=[False, True, True])
    assert select_mtd_boin(t, PARAMS) == 0
    t = make_tally([6, 0, 0], [1, 0, 0])
    assert select_mtd_boin(t, PARAMS) == 0


def test_decision_table_structure():
    rows = decision_table(PARAMS, 15)
    assert rows[0]["n"] == 1  # no n = 0 row
    r3 = rows[2]
    assert r3["eliminate_min_dlt"] == 3  # Beta(4,1) tail 0.996 > 0.95
    for row in rows:
        assert row["escalate_max_dlt"] < row["deescalate_min_dlt"]
