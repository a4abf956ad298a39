"""Command-line front door: simulations, decision tables, local trial
conduct, the HTTP service, and scenario listings."""

from __future__ import annotations

import argparse
import csv
import json
import os
import secrets
import sys
from pathlib import Path

from .boin import BoinParams, decision_table
from .conduct import NotFound, StateError, TrialStore
from .config import (
    MODES,
    ConfigError,
    RunConfig,
    SimConfig,
    TimingModel,
    comparator_designs,
    default_blrm_design,
    default_boin_design,
    load_sim_config,
)
from .events import ReplayError
from .obd import true_utility
from .scenarios import PRESETS, get_scenario, marginal_efficacy
from .sim import OcReport, replicate


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bard", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run operating-characteristics simulations")
    sim.add_argument("--config", help="YAML/JSON simulation config file")
    sim.add_argument("--design", choices=["bard-boin", "bard-blrm"],
                     help="built-in design preset (overrides the config design)")
    sim.add_argument("--scenario", help="scenario preset name, e.g. s1 or s3d2")
    sim.add_argument("--reps", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--parallelism", type=int)
    sim.add_argument("--comparator", choices=list(MODES))
    sim.add_argument("--max-n1", type=int, help="stage-1 escalation sample-size cap")
    sim.add_argument("--out", help="CSV output path (appends a row per run)")
    sim.add_argument("--trace", help="per-replication JSON-lines trace path")

    bnd = sub.add_parser("boundaries", help="print the interval decision table")
    bnd.add_argument("--phi", type=float, default=0.25)
    bnd.add_argument("--ncap", type=int, default=12)
    bnd.add_argument("--cohort", type=int, default=3)

    con = sub.add_parser("conduct", help="conduct a trial against a local event log")
    con.add_argument("--dir", required=True, help="trial data directory")
    consub = con.add_subparsers(dest="action", required=True)
    c_init = consub.add_parser("init", help="create a trial")
    c_init.add_argument("--design-file", required=True, help="design block as YAML/JSON")
    c_init.add_argument("--seed", type=int, default=None)
    c_init.add_argument("--trial-id", default="trial")
    c_enroll = consub.add_parser("enroll", help="enroll the next patient")
    c_enroll.add_argument("--trial-id", default="trial")
    c_enroll.add_argument("--covariates", required=True,
                          help="comma-separated 0/1 levels, e.g. 1,0,1")
    c_enroll.add_argument("--ineligible-stage2", action="store_true")
    c_out = consub.add_parser("outcome", help="record a patient outcome")
    c_out.add_argument("--trial-id", default="trial")
    c_out.add_argument("--patient", required=True)
    c_out.add_argument("--dlt", type=int, choices=[0, 1], required=True)
    c_out.add_argument("--response", type=int, choices=[0, 1])
    c_adv = consub.add_parser("advance", help="end stage 1 and plan stage 2")
    c_adv.add_argument("--trial-id", default="trial")
    c_adv.add_argument("--low", type=int, help="override lower dose (1-based)")
    c_adv.add_argument("--high", type=int, help="override higher dose (1-based)")
    c_status = consub.add_parser("status", help="print the current state")
    c_status.add_argument("--trial-id", default="trial")
    c_rep = consub.add_parser("report", help="print the OBD report")
    c_rep.add_argument("--trial-id", default="trial")

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--data-dir", default=None)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8440)
    srv.add_argument("--token", default=None, help="static API token")

    sub.add_parser("scenarios", help="list the built-in truth scenarios")
    return ap


def _sim_config(args) -> SimConfig:
    if args.config:
        cfg = load_sim_config(args.config)
        design, scenario, timing, run = cfg.design, cfg.scenario, cfg.timing, cfg.run
    else:
        if not args.design or not args.scenario:
            raise ConfigError("need --config, or both --design and --scenario")
        design = None
        scenario = get_scenario(args.scenario)
        timing = TimingModel()
        run = RunConfig()
    if args.design:
        n = len(get_scenario(args.scenario).dlt_rates) if args.scenario else 5
        if args.design == "bard-boin":
            design = default_boin_design(n_doses=n)
            if args.max_n1:
                design = default_boin_design(
                    n_doses=n, boin=BoinParams(max_n1=args.max_n1)
                )
        else:
            design = default_blrm_design()
            if args.max_n1:
                from .blrm import BlrmParams

                design = default_blrm_design(blrm=BlrmParams(max_n1=args.max_n1))
    if args.scenario:
        scenario = get_scenario(args.scenario)
    run = RunConfig(
        reps=args.reps or run.reps,
        seed=args.seed if args.seed is not None else run.seed,
        parallelism=args.parallelism or run.parallelism,
        comparator=args.comparator or run.comparator,
    )
    design = comparator_designs(design, run.comparator)
    if scenario.n_doses != design.n_doses:
        raise ConfigError(
            f"scenario {scenario.name} has {scenario.n_doses} doses, design has {design.n_doses}"
        )
    return SimConfig(design=design, scenario=scenario, timing=timing, run=run)


def _cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    seed = cfg.run.seed
    config_has_seed = False
    if args.config:
        import yaml

        raw = yaml.safe_load(Path(args.config).read_text())
        config_has_seed = isinstance(raw, dict) and "seed" in raw.get("run", {})
    if args.seed is None and not config_has_seed:
        seed = secrets.randbits(31)
        print(f"no seed given; using generated seed {seed}")
    report = replicate(
        cfg.design, cfg.scenario, cfg.timing,
        reps=cfg.run.reps, master_seed=seed,
        parallelism=cfg.run.parallelism, trace_path=args.trace,
    )
    _print_report(report)
    if args.out:
        new = not Path(args.out).exists()
        with open(args.out, "a", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(OcReport.CSV_COLUMNS)
            w.writerow(report.csv_row())
        print(f"appended row to {args.out}")
    return 0


def _print_report(r: OcReport) -> None:
    print(f"design {r.design}  scenario {r.scenario}  reps {r.reps}  seed {r.seed}")
    print(f"  N           {r.mean_n:8.2f}    Duration  {r.mean_duration:8.2f} months")
    print(f"  Imbalance   X1 {r.imbalance_x1:5.2f}  X2 {r.imbalance_x2:5.2f}  X3 {r.imbalance_x3:5.2f}")
    print(f"  Allocation imbalance {r.allocation_imbalance:5.2f}")
    print(f"  PCS1        {r.pcs1:8.2f}    PCS2      {r.pcs2:8.2f}")
    print(f"  Stage 1: N1 {r.mean_n1:5.2f}  carried OBD {r.pcs_stage2_doses:5.2f}%  "
          f"n1_low {r.mean_n1_low:5.2f}  n1_high {r.mean_n1_high:5.2f}  "
          f"allocation {r.allocation_imbalance_stage1:5.2f}")


def _cmd_boundaries(args) -> int:
    params = BoinParams(phi=args.phi)
    print(f"phi = {params.phi}   lambda_e = {params.lambda_e:.3f}   "
          f"lambda_d = {params.lambda_d:.3f}   elimination C = {params.elimination_cutoff}")
    print(f"{'n':>3s} {'escalate if y <=':>17s} {'de-escalate if y >=':>20s} {'eliminate if y >=':>18s}")
    for row in decision_table(params, args.ncap + args.cohort):
        elim = "-" if row["eliminate_min_dlt"] is None else str(row["eliminate_min_dlt"])
        print(f"{row['n']:3d} {row['escalate_max_dlt']:17d} {row['deescalate_min_dlt']:20d} {elim:>18s}")
    return 0


def _load_design_file(path: str):
    import yaml

    raw = yaml.safe_load(Path(path).read_text())
    if isinstance(raw, dict) and "design" in raw:
        raw = raw["design"]
    from .config import design_from_dict

    return design_from_dict(raw)


def _cmd_conduct(args) -> int:
    store = TrialStore(args.dir)
    if args.action == "init":
        design = _load_design_file(args.design_file)
        seed = args.seed if args.seed is not None else secrets.randbits(31)
        if args.seed is None:
            print(f"no --seed given; using generated seed {seed}")
        machine = store.create_trial(design, seed, args.trial_id)
        print(f"created trial {machine.trial_id} in {args.dir}")
        return 0
    machine = store.load(args.trial_id)
    if args.action == "enroll":
        cov = [int(x) for x in args.covariates.split(",")]
        events, result = machine.enroll(cov, eligible=not args.ineligible_stage2)
        store.commit(args.trial_id, events)
        print(json.dumps(result, indent=1))
        return 0
    if args.action == "outcome":
        response = None if args.response is None else bool(args.response)
        events, summary = machine.record_outcome(args.patient, bool(args.dlt), response)
        store.commit(args.trial_id, events)
        print(json.dumps(summary, indent=1))
        return 0
    if args.action == "advance":
        override = None
        if args.high is not None:
            override = (args.low - 1 if args.low else None, args.high - 1)
        events, result = machine.advance(override)
        store.commit(args.trial_id, events)
        print(json.dumps(result, indent=1))
        return 0
    if args.action == "status":
        print(json.dumps(machine.state_view(), indent=1))
        return 0
    if args.action == "report":
        print(json.dumps(machine.obd_report(), indent=1))
        return 0
    raise AssertionError(args.action)


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    data_dir = args.data_dir or os.environ.get("BARD_DATA_DIR", "./bard-data")
    app = create_app(data_dir=data_dir, api_token=args.token)
    print(f"serving trials from {data_dir} on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_scenarios() -> int:
    from .obd import UtilityTable

    table = UtilityTable()
    for name in sorted(PRESETS, key=lambda n: (len(n), n)):
        tr = PRESETS[name]
        eff = [marginal_efficacy(tr, j) for j in range(tr.n_doses)]
        util = [true_utility(pt, pe, table) for pt, pe in zip(tr.dlt_rates, eff)]
        print(f"{name}: doses={tr.n_doses}  true MTD=d{tr.true_mtd + 1}  true OBD=d{tr.true_obd + 1}")
        print(f"   DLT      {'  '.join(f'{p:5.3f}' for p in tr.dlt_rates)}")
        print(f"   response {'  '.join(f'{p:5.3f}' for p in eff)}")
        print(f"   utility  {'  '.join(f'{u:5.1f}' for u in util)}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "boundaries":
            return _cmd_boundaries(args)
        if args.command == "conduct":
            return _cmd_conduct(args)
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "scenarios":
            return _cmd_scenarios()
    except (ConfigError, StateError, NotFound, ReplayError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
