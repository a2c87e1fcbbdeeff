#!/usr/bin/env python3
"""Sandwich check: analytic floors <= simulated weighted age <= analytic ceiling.

Runs the three-user scenario with matched arrival and target rates, the age
weight pinned to alpha/((1-eps) q), and prints one row per target rate with
the achieved per-user rates and the bound values around the simulated mean.
"""
import argparse
import math
import os
import statistics
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from agecast.bounds import lower_bound_arrival, lower_bound_rate, upper_bound
from agecast.cli import sandwich_beta
from agecast.config import SystemConfig, validate
from agecast.engine import sweep


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--targets", default="0.08,0.10,0.12")
    ap.add_argument("--epsilon", type=float, default=0.6)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--horizon", type=int, default=200_000)
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()

    print(f"{'q':>6} {'lb_arrival':>10} {'lb_rate':>8} {'eaoi':>12} "
          f"{'ub':>8} {'rates':>24}")
    for q in (float(v) for v in args.targets.split(",")):
        cfg = validate(SystemConfig(
            m=3, theta=q, q=q, epsilon=args.epsilon, lam=1.0,
            beta=sandwich_beta(q, args.epsilon), horizon=args.horizon,
            buffer_depth=64,
        ))
        cell = sweep(cfg, [], list(range(1, args.seeds + 1)), jobs=args.jobs).cells[0]
        rates = [statistics.mean(r.rates[i] for r in cell.runs) for i in range(3)]
        se = cell.std_eaoi / math.sqrt(len(cell.runs))
        lo_a = lower_bound_arrival(cfg)
        lo_r = lower_bound_rate(cfg, rates)
        hi = upper_bound(cfg)
        mark = "ok" if lo_a <= cell.mean_eaoi <= hi and lo_r <= cell.mean_eaoi else "VIOLATED"
        print(f"{q:6.3f} {lo_a:10.3f} {lo_r:8.3f} "
              f"{cell.mean_eaoi:8.3f}+-{2 * se:.3f} {hi:8.3f} "
              f"{','.join(f'{r:.4f}' for r in rates):>24}  {mark}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
