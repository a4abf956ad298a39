import pytest
from fastapi.testclient import TestClient

from bard.config import default_boin_design, design_to_dict
from bard.service import create_app


@pytest.fixture()
def client(tmp_path):
    app = create_app(data_dir=tmp_path, api_token=None)
    with TestClient(app) as c:
        yield c


@pytest.fixture()
def design_id(client):
    body = {"design": design_to_dict(default_boin_design())}
    r = client.post("/designs", json=body)
    assert r.status_code == 201
    return r.json()["design_id"]


@pytest.fixture()
def trial(client, design_id):
    r = client.post("/trials", json={"design_id": design_id, "seed": 5, "trial_id": "demo"})
    assert r.status_code == 201
    return "demo"


def enroll(client, trial, cov):
    r = client.post(f"/trials/{trial}/patients", json={"covariates": cov})
    assert r.status_code == 200, r.text
    return r.json()


def outcome(client, trial, pid, dlt, response=None):
    r = client.post(
        f"/trials/{trial}/outcomes",
        json={"patient_id": pid, "dlt": dlt, "response": response},
    )
    assert r.status_code == 200, r.text
    return r.json()


def test_design_boundaries_endpoint(client, design_id):
    r = client.get(f"/designs/{design_id}/boundaries")
    assert r.status_code == 200
    body = r.json()
    assert round(body["lambda_e"], 3) == 0.197
    assert round(body["lambda_d"], 3) == 0.298
    rows = {row["n"]: row for row in body["rows"]}
    assert rows[3]["eliminate_min_dlt"] == 3
    assert max(rows) == 15  # n_cap + cohort


def test_unknown_design_404(client):
    r = client.get("/designs/nope/boundaries")
    assert r.status_code == 404
    assert r.json()["title"] == "not found"


def test_enroll_and_outcomes_drive_decisions(client, trial):
    pids = [enroll(client, trial, [0, 0, 0])["result"]["patient_id"] for _ in range(3)]
    # cohort full, no activity yet: advisory response, no enrollment
    res = enroll(client, trial, [1, 0, 0])
    assert res["result"]["assignment"] == "not-enrolled"
    for pid in pids:
        body = outcome(client, trial, pid, dlt=False, response=True)
    assert body["decision"]["current_dose"] == 2
    assert "escalate" in body["decision"]["last_decision"]["decision"]
    # lambda values surface in the explanation for auditability
    assert "lambda_e" in body["decision"]["last_decision"]["explanation"]
    # responses at dose 1 open it for backfilling once the new cohort fills
    for _ in range(3):
        enroll(client, trial, [0, 1, 0])
    res = enroll(client, trial, [1, 1, 0])
    assert res["result"]["assignment"] == "backfill"
    assert res["result"]["dose"] == 0


def test_third_dlt_marks_elimination(client, trial):
    pids = [enroll(client, trial, [0, 0, 0])["result"]["patient_id"] for _ in range(3)]
    for pid in pids:
        body = outcome(client, trial, pid, dlt=True)
    assert 1 in body["decision"]["eliminated_doses"]
    state = client.get(f"/trials/{trial}/state").json()
    assert state["stage"] == "terminated"
    assert state["doses"][0]["eliminated"]


def test_unknown_patient_404(client, trial):
    r = client.post(f"/trials/{trial}/outcomes", json={"patient_id": "P99", "dlt": True})
    assert r.status_code == 404
    assert r.json()["status"] == 404


def test_conflicting_outcome_409(client, trial):
    pid = enroll(client, trial, [0, 0, 0])["result"]["patient_id"]
    outcome(client, trial, pid, dlt=False, response=False)
    r = client.post(f"/trials/{trial}/outcomes", json={"patient_id": pid, "dlt": True})
    assert r.status_code == 409
    assert r.headers["content-type"].startswith("application/problem+json")


def test_advance_before_stop_409(client, trial):
    r = client.post(f"/trials/{trial}/advance", json={})
    assert r.status_code == 409


def test_state_is_stable_across_reads(client, trial):
    pids = [enroll(client, trial, [1, 0, 1])["result"]["patient_id"] for _ in range(2)]
    outcome(client, trial, pids[0], dlt=False, response=True)
    a = client.get(f"/trials/{trial}/state").json()
    b = client.get(f"/trials/{trial}/state").json()
    assert a == b  # replay-backed reads are deterministic


def test_full_stage2_flow_and_report(client, trial):
    rounds = 0
    state = client.get(f"/trials/{trial}/state").json()
    while state["stage"] == "stage1" and not state["decision"]["stage1_complete"]:
        pids = []
        while True:
            res = enroll(client, trial, [rounds % 2, (rounds // 2) % 2, 0])
            if res["result"]["assignment"] == "not-enrolled":
                break
            pids.append(res["result"]["patient_id"])
        for i, pid in enumerate(pids):
            outcome(client, trial, pid, dlt=(i + rounds) % 4 == 3, response=i % 2 == 0)
        state = client.get(f"/trials/{trial}/state").json()
        rounds += 1
        assert rounds < 30
    r = client.post(f"/trials/{trial}/advance", json={})
    assert r.status_code == 200
    plan = r.json()["plan"]
    assert plan is not None
    for i in range(plan["n2_star"]):
        res = enroll(client, trial, [i % 2, i % 2, (i // 2) % 2])
        assert res["result"]["assignment"] == "stage2"
    state = client.get(f"/trials/{trial}/state").json()
    assert state["stage"] == "completed"
    if plan["d_low"] is not None:
        balance = state["stage2"]["balance_table"]
        totals = state["stage2"]["arm_totals"]
        for factor in ("X1", "X2"):
            rows = [b for b in balance if b["factor"] == factor]
            assert sum(r["low"] for r in rows) == totals[0]
            assert sum(r["high"] for r in rows) == totals[1]
    # outcomes still pending: the report says so explicitly
    r = client.get(f"/trials/{trial}/report")
    assert r.status_code == 200
    report = r.json()
    assert report["partial"]
    for p in state["patients"]:
        if p["dlt"] is None:
            outcome(client, trial, p["pid"], dlt=False, response=True)
    report = client.get(f"/trials/{trial}/report").json()
    assert not report["partial"]
    allowed = {None, plan["d_high"] + 1}
    if plan["d_low"] is not None:
        allowed.add(plan["d_low"] + 1)
    assert report["obd_margin"] in allowed


def test_api_token_enforced(tmp_path):
    app = create_app(data_dir=tmp_path, api_token="sekrit")
    with TestClient(app) as c:
        assert c.get("/trials").status_code == 401
        assert c.get("/trials", headers={"X-API-Token": "sekrit"}).status_code == 200
