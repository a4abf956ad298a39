#!/usr/bin/env python3
"""Stage-1 diagnostics table: stage-1 sample size, probability of carrying
the true optimal dose into the randomization stage, per-arm stage-1 counts
and the stage-1 allocation imbalance, for the seamless design under both
escalation engines."""

import argparse
import sys

from bard.blrm import BlrmParams
from bard.config import TimingModel, default_blrm_design, default_boin_design
from bard.scenarios import get_scenario
from bard.sim import replicate

BLRM_MAX_N1 = {"s1": 18, "s2": 21, "s3": 27, "s4": 27, "s5": 18, "s6": 21, "s7": 27, "s8": 27}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=30000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--parallelism", type=int, default=1)
    args = ap.parse_args()

    timing = TimingModel()
    print(f"{'design':10s} {'scen':5s} {'N1':>6s} {'carried%':>9s} "
          f"{'n1_low':>7s} {'n1_high':>8s} {'alloc1':>7s}")
    for name in (f"s{i}" for i in range(1, 9)):
        for engine in ("boin", "blrm"):
            if engine == "boin":
                design = default_boin_design()
                reps = args.reps
            else:
                design = default_blrm_design(blrm=BlrmParams(max_n1=BLRM_MAX_N1[name]))
                reps = min(args.reps, 2000)
            r = replicate(design, get_scenario(name), timing, reps,
                          master_seed=args.seed, parallelism=args.parallelism)
            print(f"{r.design:10s} {name:5s} {r.mean_n1:6.2f} {r.pcs_stage2_doses:9.2f} "
                  f"{r.mean_n1_low:7.2f} {r.mean_n1_high:8.2f} "
                  f"{r.allocation_imbalance_stage1:7.2f}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
