#!/usr/bin/env python3
"""Run the two-task Forrester study and print the comparison tables.

Reproduces the correlation x data-availability sweep: for each Pearson
correlation target an auxiliary Forrester variant is calibrated, then a
single-task GP (task-1 data only) is compared against the multi-task GP
(both tasks) on held-out task-1 points, averaged over seeded replicates.

Example:
    python scripts/run_forrester_study.py --out results/ --replicates 20
"""

import argparse
import sys

from mtgp.benchmark import StudyConfig, format_study_table, run_study
from mtgp.cli import BENCHMARK_TRAIN_DEFAULTS, _write_study_files
from mtgp.training import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=None, help="directory for CSV/JSON artifacts")
    ap.add_argument("--correlations", default="0.89,0.53,0.33")
    ap.add_argument("--sizes", default="5,5;5,10;10,5;10,10",
                    help="semicolon-separated n1,n2 pairs")
    ap.add_argument("--replicates", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-iterations", type=int,
                    default=BENCHMARK_TRAIN_DEFAULTS["max_iterations"])
    ap.add_argument("--num-restarts", type=int,
                    default=BENCHMARK_TRAIN_DEFAULTS["num_restarts"])
    args = ap.parse_args()

    study = StudyConfig(
        correlations=tuple(float(v) for v in args.correlations.split(",")),
        size_grid=tuple(
            (int(p.split(",")[0]), int(p.split(",")[1])) for p in args.sizes.split(";")
        ),
        replicates=args.replicates,
        seed=args.seed,
    )
    train = TrainConfig(
        learning_rate=BENCHMARK_TRAIN_DEFAULTS["learning_rate"],
        max_iterations=args.max_iterations,
        convergence_tolerance=BENCHMARK_TRAIN_DEFAULTS["convergence_tolerance"],
        num_restarts=args.num_restarts,
        seed=BENCHMARK_TRAIN_DEFAULTS["seed"],
    )
    result = run_study(study, train)
    print(format_study_table(result))
    if args.out:
        _write_study_files(result, args.out)
        print(f"artifacts written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
