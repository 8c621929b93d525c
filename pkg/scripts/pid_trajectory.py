"""RID atom trajectories for a trained and an untrained teacher (one seed).

Writes pid_<mode>.csv and an SVG per atom into the output directory.

    python scripts/pid_trajectory.py --seed 0 --out trajectories
"""

import argparse
from pathlib import Path

from pidkd.datasets import make_dataset
from pidkd.distill import DistillConfig, make_teacher, train
from pidkd.harness import resolve_out
from pidkd.report import Chart, Series, write_svg

ATOMS = ("red", "uni_t", "uni_s", "syn")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pid-every", type=int, default=10)
    ap.add_argument("--out", default="trajectories")
    args = ap.parse_args()
    out = resolve_out(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = make_dataset({"generator": "blobs"})
    traj = {}
    for mode in ("trained", "untrained"):
        cfg = DistillConfig(name=f"rid_{mode}", framework="RID", teacher_mode=mode, seed=args.seed,
                            pid_every=args.pid_every)
        rep = train(cfg, data, make_teacher(cfg, data),
                    log_fn=lambda r: print(f"{mode:>9} epoch {r['epoch']:>3} {r['phase']:<7} acc {r['student_acc']:.3f}"))
        rep.write(out / f"rid_{mode}")
        traj[mode] = rep.pid
    for atom in ATOMS:
        series = [Series(mode, [p["epoch"] for p in rows], [p[atom] for p in rows]) for mode, rows in traj.items()]
        write_svg(Chart(f"RID: {atom} between teacher and student", "epoch", "bits", series), out / f"{atom}.svg")
    print("wrote", out)


if __name__ == "__main__":
    main()
