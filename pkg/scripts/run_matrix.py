"""Run an experiment matrix and print the final-accuracy table.

    python scripts/run_matrix.py scripts/configs/desk_matrix.json [--out DIR] [--parallel N]

Output goes under $PIDKD_OUT_ROOT when the path is relative.
"""

import argparse
import logging
from pathlib import Path

from pidkd.harness import ExperimentMatrix, run_matrix


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("matrix", type=Path)
    ap.add_argument("--out")
    ap.add_argument("--parallel", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    m = ExperimentMatrix.load(args.matrix)
    if args.parallel:
        m.parallel = args.parallel
    summary = run_matrix(m, args.out)
    print(f"{'cell':<22}{'mean':>8}{'std':>8}")
    for key, v in sorted(summary.get("final_accuracy", {}).items()):
        print(f"{key:<22}{v['mean']:>8.4f}{v['std']:>8.4f}")
    for path in summary.get("outputs", []):
        print("wrote", path)
    if summary["failures"]:
        print("failed cells:", ", ".join(summary["failures"]))
        raise SystemExit(1)


if __name__ == "__main__":
    main()
