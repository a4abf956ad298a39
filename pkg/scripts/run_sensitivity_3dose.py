#!/usr/bin/env python3
"""Three-dose sensitivity runs: the seamless interval design against its
simple-randomization comparator on the s3d1..s3d4 presets, with the
stage-1 escalation cap at 18."""

import argparse
import dataclasses
import sys

from bard.boin import BoinParams
from bard.config import TimingModel, comparator_designs, default_boin_design
from bard.scenarios import get_scenario
from bard.sim import replicate


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=30000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--parallelism", type=int, default=1)
    args = ap.parse_args()

    timing = TimingModel()
    base = dataclasses.replace(
        default_boin_design(n_doses=3), boin=BoinParams(max_n1=18)
    )
    for name in ("s3d1", "s3d2", "s3d3", "s3d4"):
        for mode in ("bard", "sr"):
            design = comparator_designs(base, mode)
            r = replicate(design, get_scenario(name), timing, args.reps,
                          master_seed=args.seed, parallelism=args.parallelism)
            print(f"{r.design:10s} {name}: N={r.mean_n:6.2f} dur={r.mean_duration:6.2f} "
                  f"X1={r.imbalance_x1:5.2f} alloc={r.allocation_imbalance:4.2f} "
                  f"PCS1={r.pcs1:5.2f} PCS2={r.pcs2:5.2f}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
