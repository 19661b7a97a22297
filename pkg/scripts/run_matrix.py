#!/usr/bin/env python3
"""Generate the benchmark grid and run the seeds x algorithms matrix.

Produces one aggregated CSV (per-run rows plus mean/std rows per cell), the
same format as `detdec bench`.  Instance descriptors land next to the CSV so
every row can be reproduced individually.

Example:
    python3 scripts/run_matrix.py --out runs/matrix --seeds 10 --sizes small
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from detdec import CollectingSpec, MactpSpec, collecting_generate, mactp_generate
from detdec.cli import main as cli_main
from detdec.envs import save_descriptor

GRIDS = {
    "small": {
        "mactp": [(3, 2, 5)],
        "collecting": [(4, 3, 2, 2)],
    },
    "medium": {
        "mactp": [(3, 2, 5), (4, 2, 8)],
        "collecting": [(4, 3, 2, 2), (4, 4, 2, 3)],
    },
    "large": {
        "mactp": [(3, 2, 5), (4, 2, 8), (4, 2, 12)],
        "collecting": [(4, 3, 2, 2), (4, 4, 2, 3), (5, 5, 2, 4)],
    },
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/matrix", help="output directory")
    parser.add_argument("--sizes", choices=sorted(GRIDS), default="small")
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--instance-seed", type=int, default=0,
                        help="seed used to generate the instances themselves")
    parser.add_argument("--algos", default="idpp,init-only")
    parser.add_argument("--node-budget", type=int, default=8000)
    parser.add_argument("--epsilon", type=float, default=1e-3)
    parser.add_argument("--max-rounds", type=int, default=10)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    instance_paths = []
    grid = GRIDS[args.sizes]
    for n, agents, edges in grid["mactp"]:
        model = mactp_generate(MactpSpec(n, agents, edges, args.instance_seed))
        path = out / f"mactp-n{n}-a{agents}-e{edges}-s{args.instance_seed}.json"
        save_descriptor(model, path)
        instance_paths.append(path)
    for h, w, agents, boxes in grid["collecting"]:
        model = collecting_generate(CollectingSpec(h, w, agents, boxes, args.instance_seed))
        path = out / f"collecting-h{h}-w{w}-a{agents}-b{boxes}-s{args.instance_seed}.json"
        save_descriptor(model, path)
        instance_paths.append(path)

    bench_args = ["bench", "--out", str(out / "matrix.csv"),
                  "--algos", args.algos, "--seeds", str(args.seeds),
                  "--node-budget", str(args.node_budget),
                  "--epsilon", str(args.epsilon),
                  "--max-rounds", str(args.max_rounds),
                  "--workers", str(args.workers),
                  "--order", "random"]
    for path in instance_paths:
        bench_args += ["--instance", str(path)]
    return cli_main(bench_args)


if __name__ == "__main__":
    sys.exit(main())
