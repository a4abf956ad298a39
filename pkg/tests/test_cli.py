import csv
import json
from pathlib import Path

import pytest
import yaml

from bard.cli import main
from bard.config import design_to_dict, default_boin_design, load_sim_config


def run_cli(*argv):
    return main(list(argv))


def test_boundaries_output(capsys):
    assert run_cli("boundaries", "--phi", "0.25", "--ncap", "12") == 0
    out = capsys.readouterr().out
    assert "lambda_e = 0.197" in out
    assert "lambda_d = 0.298" in out
    lines = [l for l in out.splitlines() if l.strip() and l.strip()[0].isdigit()]
    assert lines[0].split()[0] == "1"  # no n = 0 row
    n3 = next(l for l in lines if l.split()[0] == "3")
    assert n3.split()[3] == "3"  # eliminate at 3 of 3


def test_scenarios_listing(capsys):
    assert run_cli("scenarios") == 0
    out = capsys.readouterr().out
    assert "s1:" in out and "s3d4:" in out
    assert "true OBD=d2" in out


def test_simulate_with_config_and_csv(tmp_path, capsys):
    cfg = {
        "design": {"engine": "boin", "doses": 5, "phi": 0.25},
        "scenario": "s1",
        "timing": {"accrual_rate": 3.0},
        "run": {"reps": 40, "seed": 11, "comparator": "bard"},
    }
    cfg_path = tmp_path / "sim.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg))
    out_csv = tmp_path / "oc.csv"
    assert run_cli("simulate", "--config", str(cfg_path), "--out", str(out_csv)) == 0
    text = capsys.readouterr().out
    assert "design bard-boin" in text and "scenario s1" in text
    rows = list(csv.DictReader(open(out_csv)))
    assert len(rows) == 1
    assert rows[0]["design"] == "bard-boin"
    assert float(rows[0]["N"]) > 20


def test_simulate_deterministic_outputs(tmp_path):
    args = ["simulate", "--design", "bard-boin", "--scenario", "s1",
            "--reps", "25", "--seed", "7"]
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli(*args, "--out", str(out1)) == 0
    assert run_cli(*args, "--out", str(out2)) == 0
    assert out1.read_text() == out2.read_text()


def test_simulate_sr_allocation_zero(tmp_path):
    out_csv = tmp_path / "sr.csv"
    assert run_cli(
        "simulate", "--design", "bard-boin", "--scenario", "s1", "--reps", "60",
        "--seed", "3", "--comparator", "sr", "--out", str(out_csv),
    ) == 0
    row = next(csv.DictReader(open(out_csv)))
    assert row["design"] == "boin-sr"
    assert float(row["Imbalance_allocation"]) == 0.0


def test_simulate_bad_config_diagnostic(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"design": {"engine": "boin"}}))
    assert run_cli("simulate", "--config", str(bad)) == 2
    err = capsys.readouterr().err
    assert "scenario" in err


def test_conduct_round_trip(tmp_path, capsys):
    design_file = tmp_path / "design.yaml"
    design_file.write_text(yaml.safe_dump(design_to_dict(default_boin_design())))
    data_dir = tmp_path / "trial-data"
    assert run_cli("conduct", "--dir", str(data_dir), "init",
                   "--design-file", str(design_file), "--seed", "9") == 0
    capsys.readouterr()
    for _ in range(3):
        assert run_cli("conduct", "--dir", str(data_dir), "enroll",
                       "--covariates", "1,0,1") == 0
    capsys.readouterr()
    assert run_cli("conduct", "--dir", str(data_dir), "outcome",
                   "--patient", "P1", "--dlt", "0", "--response", "1") == 0
    capsys.readouterr()
    assert run_cli("conduct", "--dir", str(data_dir), "status") == 0
    status = json.loads(capsys.readouterr().out)
    assert status["doses"][0]["enrolled"] == 3
    assert status["doses"][0]["assessed"] == 1
    # replaying a copied log directory reproduces the status
    import shutil

    copy_dir = tmp_path / "copy"
    shutil.copytree(data_dir, copy_dir)
    assert run_cli("conduct", "--dir", str(copy_dir), "status") == 0
    assert json.loads(capsys.readouterr().out) == status


def test_conduct_unknown_patient_exit_code(tmp_path, capsys):
    design_file = tmp_path / "design.yaml"
    design_file.write_text(yaml.safe_dump(design_to_dict(default_boin_design())))
    data_dir = tmp_path / "d"
    run_cli("conduct", "--dir", str(data_dir), "init", "--design-file", str(design_file), "--seed", "1")
    log = data_dir / "trials" / "trial.jsonl"
    before = log.read_text()
    assert run_cli("conduct", "--dir", str(data_dir), "outcome",
                   "--patient", "P9", "--dlt", "1") == 2
    assert log.read_text() == before  # no mutation on failure


def test_config_round_trip(tmp_path):
    cfg = {
        "design": {
            "engine": "blrm", "dosages": [10, 20, 50, 100, 200], "ref_dosage": 50,
            "gamma1": 0.16, "gamma2": 0.33, "eta": 0.3, "max_n1": 21,
        },
        "scenario": {
            "name": "custom", "dlt_rates": [0.1, 0.2, 0.3, 0.4, 0.5],
            "beta0": [-2.0, -1.5, -1.0, -0.5, 0.0], "true_obd": 2, "true_mtd": 2,
        },
        "run": {"reps": 5, "seed": 1},
    }
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    sim_cfg = load_sim_config(path)
    assert sim_cfg.design.engine == "blrm"
    assert sim_cfg.design.blrm.max_n1 == 21
    assert sim_cfg.scenario.true_obd == 1  # 1-based in files, 0-based inside
