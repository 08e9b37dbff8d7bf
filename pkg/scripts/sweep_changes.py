#!/usr/bin/env python3
"""Sweep change-point count and measure how much annotation work remains.

For each change count c and each seed, synthesizes an 80-frame clip, runs the
scripted annotator against the scheduler, and reports human frames, automation
fraction, and mean cIoU. The no-assistance baseline is always n human frames,
so automation fraction is the headline number.

Usage:
    python3 scripts/sweep_changes.py --workdir /tmp/sweep --seeds 5 --max-changes 4
    python3 scripts/sweep_changes.py --workdir /tmp/sweep --noisy --csv out.csv
"""

from __future__ import annotations

import argparse
import csv
import statistics
import sys
import tempfile
from pathlib import Path

from avloop.session import Session
from avloop.simulate import SimPolicy, run_simulation
from avloop.synth import synthesize


def run_cell(workdir: Path, n_frames: int, changes: int, seed: int,
             miss_rate: float, policy: SimPolicy) -> dict:
    root = workdir / f"c{changes}_s{seed}"
    project = synthesize(root, n_frames=n_frames, changes=changes, seed=seed,
                         miss_rate=miss_rate)
    report = run_simulation(project, policy)
    stats = Session.open(project, report.session_id).stats()
    return {
        "changes": changes,
        "seed": seed,
        "human_frames": report.human_frames,
        "automation_fraction": stats.automation_fraction,
        "mean_ciou": stats.mean_ciou,
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", type=Path, default=None,
                        help="where to materialize clips (default: temp dir)")
    parser.add_argument("--frames", type=int, default=80)
    parser.add_argument("--seeds", type=int, default=5, help="seeds per cell")
    parser.add_argument("--max-changes", type=int, default=4)
    parser.add_argument("--miss-rate", type=float, default=0.05)
    parser.add_argument("--noisy", action="store_true",
                        help="jittered boxes and occasional wrong picks")
    parser.add_argument("--csv", type=Path, help="also write raw rows here")
    args = parser.parse_args()

    workdir = args.workdir or Path(tempfile.mkdtemp(prefix="avloop-sweep-"))
    workdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for changes in range(args.max_changes + 1):
        for seed in range(args.seeds):
            policy = (SimPolicy.noisy(2.0, 0.05, seed=seed) if args.noisy
                      else SimPolicy(seed=seed))
            rows.append(run_cell(workdir, args.frames, changes, seed,
                                 args.miss_rate, policy))

    print(f"{'changes':>7}  {'human':>11}  {'automation':>10}  {'mean cIoU':>9}")
    for changes in range(args.max_changes + 1):
        cell = [r for r in rows if r["changes"] == changes]
        human = statistics.mean(r["human_frames"] for r in cell)
        auto = statistics.mean(r["automation_fraction"] for r in cell)
        ciou = statistics.mean(r["mean_ciou"] for r in cell)
        print(f"{changes:>7}  {human:>5.1f}/{args.frames:<5}  {auto:>10.1%}  {ciou:>9.4f}")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"\nraw rows -> {args.csv}")
    print(f"clips kept in {workdir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
