#!/usr/bin/env python3
"""Regenerate every experiment preset as CSV, desk scale by default.

Usage:
    python scripts/reproduce_figures.py [--out DIR] [--seeds N] [--horizon K]
                                        [--jobs N] [--only fig4,fig8]

Full published scale is --seeds 20 --horizon 200000 (slow on a laptop);
the defaults cut both for a quick look at the curve shapes.
"""
import argparse
import csv
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from agecast.cli import PRESETS, preset_families
from agecast.engine import metrics_header, metrics_row, sweep


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--horizon", type=int, default=50_000)
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--only", default=",".join(PRESETS))
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    names = [n.strip() for n in args.only.split(",") if n.strip()]
    seeds = list(range(1, args.seeds + 1))
    for name in names:
        t0 = time.time()
        rows = []
        m = None
        for base, axes in preset_families(name, args.horizon):
            res = sweep(base, axes, seeds, jobs=args.jobs)
            rows.extend(res.rows)
            m = base.m
        path = os.path.join(args.out, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(metrics_header(m))
            for r in rows:
                w.writerow(metrics_row(r))
        print(f"{name}: {len(rows)} rows -> {path} ({time.time() - t0:.0f}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
