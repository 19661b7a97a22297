#!/usr/bin/env python3
"""Per-iteration value curves for the best-response loop on one instance.

Runs the solver for several seeds (randomized agent order keeps the runs
distinct) and writes one history CSV per seed plus a combined long-format
CSV: seed, iteration, round, agent, accepted, value.  Feed the combined file
to any plotting tool to draw convergence curves.

Example:
    python3 scripts/iteration_curves.py runs/matrix/mactp-n3-a2-e5-s0.json \
        --out runs/curves --seeds 5
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from detdec.cli import RunConfig, run_solve


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("instance")
    parser.add_argument("--out", default="runs/curves")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--node-budget", type=int, default=8000)
    parser.add_argument("--epsilon", type=float, default=1e-3)
    parser.add_argument("--max-rounds", type=int, default=12)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    combined = []
    for seed in range(args.seeds):
        config = RunConfig(
            instance=args.instance,
            algo="idpp",
            seed=seed,
            agent_order="random",
            epsilon=args.epsilon,
            node_budget=args.node_budget,
            max_rounds=args.max_rounds,
            episodes=0,
        )
        report = run_solve(config, out / f"seed{seed}")
        combined.append((seed, 0, 0, -1, True, report["init_value"]))
        for k, rec in enumerate(report.get("iterations", []), start=1):
            combined.append((seed, k, rec["round"], rec["agent"], rec["accepted"],
                             rec["post_value"]))
        print(f"seed {seed}: init {report['init_value']:.3f} -> final {report['final_value']:.3f} "
              f"({'converged' if report['converged'] else 'budget'})")

    with open(out / "curves.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "iteration", "round", "agent", "accepted", "value"])
        writer.writerows(combined)
    print(f"wrote {out / 'curves.csv'} ({len(combined)} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
