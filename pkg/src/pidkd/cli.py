"""Command-line entry point.

Exit codes: 0 all checks passed, 1 a property check failed, 2 usage or I/O error.
Relative output paths are placed under $PIDKD_OUT_ROOT when it is set.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .datasets import make_example_triple, make_nuisance_task, save_dataset, make_dataset
from .info_core import InvalidDistribution, load_joint, save_joint
from .pid_broja import SolverOptions, UnsupportedSize, oracle_unique, pid
from .pid_intersection import red_cap_deterministic, red_cap_stochastic
from .rep_pipeline import RepDump, load_matrix_csv, pipeline_pid
from .report import chart_from_csv, write_svg
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SWEEP_COLS = ("file", "red", "uni_t", "uni_s", "syn", "mi_yt", "mi_ys", "mi_yts", "iters", "violation")


class UsageError(Exception):
    pass


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, default=_jsonable)
    if out:
        path = harness.resolve_out(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n")
    else:
        print(text)


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialize {type(v)}")


def _opts(args) -> SolverOptions:
    if getattr(args, "tol", None):
        return SolverOptions(obj_tol=args.tol)
    return SolverOptions()


# --- pid ----------------------------------------------------------------

def cmd_pid_compute(args):
    joint = load_joint(args.input)
    atoms = pid(joint, _opts(args))
    out = atoms.as_dict()
    if args.oracle:
        try:
            out["oracle_uni_t"] = oracle_unique(joint)
            out["oracle_gap"] = abs(out["oracle_uni_t"] - atoms.uni_t)
        except UnsupportedSize as exc:
            out["oracle_error"] = str(exc)
    _emit(out, args.out)
    return EXIT_OK


def cmd_pid_sweep(args):
    folder = Path(args.dir)
    if not folder.is_dir():
        raise FileNotFoundError(f"no such directory: {folder}")
    files = sorted(p for p in folder.iterdir() if p.suffix.lower() in (".json", ".csv"))
    lines = [",".join(SWEEP_COLS)]
    for f in files:
        a = pid(load_joint(f), _opts(args))
        vals = [f.name] + [repr(getattr(a, c)) for c in SWEEP_COLS[1:8]]
        vals += [str(a.diag.iterations), repr(a.diag.violation)]
        lines.append(",".join(vals))
    text = "\n".join(lines) + "\n"
    if args.out:
        path = harness.resolve_out(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_pid_intersect(args):
    joint = load_joint(args.input)
    found = []
    if args.method in ("det", "both"):
        found.append(red_cap_deterministic(joint, max_q_card=args.q_card))
    if args.method in ("stoch", "both"):
        found.append(red_cap_stochastic(joint, q_card=args.q_card, seed=args.seed))
    feasible = [c for c in found if c.feasible]
    best = max(feasible, key=lambda c: c.achieved_value) if feasible else found[0]
    _emit({"best": best.as_dict(), "candidates": [c.as_dict() for c in found]}, args.out)
    return EXIT_OK


# --- verify -------------------------------------------------------------

def cmd_verify(args):
    res = run_suite(args.suite, n=args.n, seed=args.seed)
    _emit(res, args.out)
    return EXIT_OK if res["passed"] else EXIT_FAIL


# --- data ---------------------------------------------------------------

def _parse_params(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def cmd_data_gen(args):
    out = harness.resolve_out(args.out)
    params = _parse_params(args.param)
    if args.generator == "example":
        joint, samples = make_example_triple(args.which, n_samples=args.n_samples, seed=args.seed, **params)
        out.mkdir(parents=True, exist_ok=True)
        save_joint(joint, out / f"example{args.which}.json")
        if samples is not None:
            np.savetxt(out / f"example{args.which}_samples.csv", samples, fmt="%d", delimiter=",",
                       header="y,t,s", comments="")
        written = sorted(str(p) for p in out.iterdir())
    elif args.generator == "nuisance":
        task = make_nuisance_task(seed=args.seed, **params)
        written = [str(p) for p in save_dataset(task.data, out)]
        save_joint(task.joint_s_is_z, out / "joint_s_is_z.json")
        save_joint(task.joint_s_is_g, out / "joint_s_is_g.json")
        written += [str(out / "joint_s_is_z.json"), str(out / "joint_s_is_g.json")]
    else:
        data = make_dataset({"generator": "blobs", "seed": args.seed, **params})
        written = [str(p) for p in save_dataset(data, out)]
    _emit({"generator": args.generator, "written": written})
    return EXIT_OK


# --- distill ------------------------------------------------------------

def cmd_distill_run(args):
    cfg = harness.load_config(args.config)
    out = harness.resolve_out(args.out or Path("runs") / cfg.name)
    rep = harness.run_one(cfg, out)
    _emit({"name": cfg.name, "out": str(out), "final_acc": rep.final_acc(), "teacher_acc": rep.teacher_acc,
           "final_pid": rep.pid[-1] if rep.pid else None, "wall_time_s": rep.wall_time})
    return EXIT_OK


def cmd_distill_compare(args):
    dirs = [Path(d) for d in args.runs]
    missing = [str(d) for d in dirs if not (d / "summary.json").exists()]
    if missing:
        raise FileNotFoundError(f"not run directories: {missing}")
    _emit(harness.compare(dirs, args.out))
    return EXIT_OK


# --- pipeline / report / matrix ----------------------------------------------

def cmd_pipeline_pid(args):
    t = load_matrix_csv(args.reps_t)
    s = load_matrix_csv(args.reps_s)
    y = load_matrix_csv(args.labels)
    if y.shape[1] != 1:
        raise UsageError("labels CSV must have a single column")
    res = pipeline_pid(RepDump(t, s, y[:, 0]), n_components=args.pca, k=args.k, seed=args.seed)
    _emit(res.as_dict(), args.out)
    return EXIT_OK


def cmd_report_plot(args):
    chart = chart_from_csv(args.csv, args.x, args.y, group=args.group, band=args.band, title=args.title)
    path = write_svg(chart, harness.resolve_out(args.out))
    _emit({"svg": str(path), "series": len(chart.series)})
    return EXIT_OK


def cmd_matrix_run(args):
    matrix = harness.ExperimentMatrix.load(args.matrix)
    if args.parallel:
        matrix.parallel = args.parallel
    summary = harness.run_matrix(matrix, args.out)
    _emit(summary)
    return EXIT_FAIL if summary["failures"] else EXIT_OK


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pidkd", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pid", help="PID atoms, batch sweeps, intersection information")
    psub = p.add_subparsers(dest="action", required=True)
    c = psub.add_parser("compute")
    c.add_argument("--input", required=True)
    c.add_argument("--oracle", action="store_true", help="also run the exhaustive grid oracle")
    c.add_argument("--tol", type=float, help="objective tolerance")
    c.add_argument("--out")
    c.set_defaults(fn=cmd_pid_compute)
    c = psub.add_parser("sweep")
    c.add_argument("--dir", required=True)
    c.add_argument("--tol", type=float)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_pid_sweep)
    c = psub.add_parser("intersect")
    c.add_argument("--input", required=True)
    c.add_argument("--q-card", type=int, default=2)
    c.add_argument("--method", choices=("det", "stoch", "both"), default="both")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_pid_intersect)

    p = sub.add_parser("verify", help="theorem property batches")
    p.add_argument("suite", nargs="?", default="all", choices=SUITES + ("all",))
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("data", help="dataset generation")
    dsub = p.add_subparsers(dest="action", required=True)
    c = dsub.add_parser("gen")
    c.add_argument("--generator", choices=("blobs", "nuisance", "example"), default="blobs")
    c.add_argument("--which", type=int, default=1, help="example number (example generator)")
    c.add_argument("--n-samples", type=int, default=0)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--param", action="append", help="generator keyword as key=value (repeatable)")
    c.add_argument("--out", required=True)
    c.set_defaults(fn=cmd_data_gen)

    p = sub.add_parser("distill", help="training runs and comparisons")
    dsub = p.add_subparsers(dest="action", required=True)
    c = dsub.add_parser("run")
    c.add_argument("--config", required=True)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_distill_run)
    c = dsub.add_parser("compare")
    c.add_argument("--runs", nargs="+", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(fn=cmd_distill_compare)

    p = sub.add_parser("pipeline", help="PID of continuous representations")
    psub = p.add_subparsers(dest="action", required=True)
    c = psub.add_parser("pid")
    c.add_argument("--reps-t", required=True)
    c.add_argument("--reps-s", required=True)
    c.add_argument("--labels", required=True)
    c.add_argument("--k", type=int, default=10)
    c.add_argument("--pca", type=int, default=10)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_pipeline_pid)

    p = sub.add_parser("report", help="SVG charts from CSV")
    rsub = p.add_subparsers(dest="action", required=True)
    c = rsub.add_parser("plot")
    c.add_argument("--csv", required=True)
    c.add_argument("--x", required=True)
    c.add_argument("--y", required=True)
    c.add_argument("--group")
    c.add_argument("--band")
    c.add_argument("--title")
    c.add_argument("--out", required=True)
    c.set_defaults(fn=cmd_report_plot)

    p = sub.add_parser("matrix", help="framework x teacher mode x seed experiments")
    msub = p.add_subparsers(dest="action", required=True)
    c = msub.add_parser("run")
    c.add_argument("--matrix", required=True)
    c.add_argument("--out")
    c.add_argument("--parallel", type=int)
    c.set_defaults(fn=cmd_matrix_run)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)  # argparse exits with 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (UsageError, OSError, InvalidDistribution, UnsupportedSize, ValueError, KeyError,
            json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
