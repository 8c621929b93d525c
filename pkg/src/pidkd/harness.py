"""Experiment matrices: framework x teacher mode x seed, plus aggregation."""

from __future__ import annotations

import json
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .datasets import make_dataset
from .distill import FRAMEWORKS, DistillConfig, TrainReport, make_teacher, train
from .report import Chart, Series, write_svg

log = logging.getLogger(__name__)

OUT_ROOT_ENV = "PIDKD_OUT_ROOT"
SCHEMA_VERSION = 1
ATOMS = ("red", "uni_t", "uni_s", "syn", "mi_yt", "mi_ys", "mi_yts")


def resolve_out(path) -> Path:
    """Relative output paths live under $PIDKD_OUT_ROOT when it is set."""
    path = Path(path)
    root = os.environ.get(OUT_ROOT_ENV)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


@dataclass
class ExperimentMatrix:
    name: str = "matrix"
    frameworks: list = field(default_factory=lambda: list(FRAMEWORKS))
    teacher_modes: list = field(default_factory=lambda: ["trained", "untrained"])
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    dataset: dict = field(default_factory=lambda: {"generator": "blobs"})
    base: dict = field(default_factory=dict)  # DistillConfig overrides shared by all cells
    out_dir: str = "runs"
    parallel: int = 1

    def __post_init__(self):
        bad = set(self.frameworks) - set(FRAMEWORKS)
        if bad:
            raise ValueError(f"unknown frameworks {sorted(bad)}")
        if not self.seeds or any(not isinstance(s, int) for s in self.seeds):
            raise ValueError("seeds must be an explicit non-empty list of integers")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("duplicate seeds")
        if self.parallel < 1:
            raise ValueError("parallel must be >= 1")
        clash = {"framework", "teacher_mode", "seed", "name", "dataset"} & set(self.base)
        if clash:
            raise ValueError(f"base may not set per-cell keys {sorted(clash)}")
        names = [c.name for c in self.cells()]
        if len(set(names)) != len(names):
            raise ValueError("run names are not unique")

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentMatrix":
        version = obj.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {version}")
        extra = set(obj) - set(cls.__dataclass_fields__) - {"schema_version"}
        if extra:
            raise ValueError(f"unknown matrix keys: {sorted(extra)}")
        return cls(**{k: v for k, v in obj.items() if k != "schema_version"})

    @classmethod
    def load(cls, path) -> "ExperimentMatrix":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **asdict(self)}

    def cells(self) -> list[DistillConfig]:
        out = []
        for mode in self.teacher_modes:
            for fw in self.frameworks:
                for seed in self.seeds:
                    out.append(DistillConfig(name=f"{fw}_{mode}_s{seed}", framework=fw, teacher_mode=mode,
                                             seed=seed, dataset=dict(self.dataset), **self.base))
        return out


def load_config(path) -> DistillConfig:
    obj = json.loads(Path(path).read_text())
    version = obj.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version}")
    return DistillConfig.from_dict(obj)


# teachers depend only on (data, seed, mode, teacher settings); cache per process
_TEACHERS: dict = {}


def _teacher_key(cfg: DistillConfig):
    return json.dumps([cfg.dataset, cfg.seed, cfg.teacher_mode, cfg.teacher_hidden, cfg.teacher_epochs,
                       cfg.teacher_n_train, cfg.lr, cfg.momentum, cfg.weight_decay, cfg.batch_size,
                       cfg.clip_norm], sort_keys=True)


def run_one(cfg: DistillConfig, out_dir, data=None) -> TrainReport:
    """Train one cell and persist its report and checkpoints."""
    data = data if data is not None else make_dataset(cfg.dataset)
    key = _teacher_key(cfg)
    if key not in _TEACHERS:
        _TEACHERS[key] = make_teacher(cfg, data)
    rep = train(cfg, data, _TEACHERS[key])
    out = Path(out_dir)
    rep.write(out)
    rep.student.save(out / "student.json")
    rep.teacher.save(out / "teacher.json")
    return rep


def _cell_worker(args):
    cfg_dict, out_dir = args
    cfg = DistillConfig.from_dict(cfg_dict)
    try:
        run_one(cfg, out_dir)
        return cfg.name, None
    except Exception:  # isolate the failure to this cell
        err = traceback.format_exc()
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "error.txt").write_text(err)
        return cfg.name, err


def run_matrix(matrix: ExperimentMatrix, out_dir=None) -> dict:
    root = resolve_out(out_dir or matrix.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    (root / "matrix.json").write_text(json.dumps(matrix.to_dict(), indent=2))
    jobs = [(c.to_dict(), str(root / "runs" / c.name)) for c in matrix.cells()]
    if matrix.parallel > 1:
        with ProcessPoolExecutor(max_workers=matrix.parallel) as pool:
            results = list(pool.map(_cell_worker, jobs))
    else:
        results = [_cell_worker(j) for j in jobs]
    failures = {name: err for name, err in results if err}
    for name in failures:
        log.error("cell %s failed; see its error.txt", name)
    ok_dirs = [Path(d) for (_, d), (name, err) in zip(jobs, results) if not err]
    summary = compare(ok_dirs, root) if ok_dirs else {}
    summary["failures"] = sorted(failures)
    return summary


# --- aggregation ---------------------------------------------------------

def aggregate_reports(reports) -> tuple[list[dict], list[dict]]:
    """Mean/std over seeds per (teacher_mode, framework, epoch).

    Returns (accuracy rows, pid rows).
    """
    acc: dict = {}
    pid: dict = {}
    for rep in reports:
        key = (rep.config["teacher_mode"], rep.config["framework"])
        for e in rep.epochs:
            acc.setdefault(key + (int(e["epoch"]),), []).append(float(e["student_acc"]))
        for p in rep.pid:
            pid.setdefault(key + (int(p["epoch"]),), []).append([float(p[a]) for a in ATOMS])
    acc_rows = []
    for (mode, fw, ep), vals in sorted(acc.items()):
        v = np.array(vals)
        acc_rows.append({"teacher_mode": mode, "framework": fw, "epoch": ep, "n": len(v),
                         "acc_mean": float(v.mean()), "acc_std": float(v.std(ddof=1)) if len(v) > 1 else 0.0})
    pid_rows = []
    for (mode, fw, ep), vals in sorted(pid.items()):
        v = np.array(vals)
        row = {"teacher_mode": mode, "framework": fw, "epoch": ep, "n": len(v)}
        row.update({a: float(m) for a, m in zip(ATOMS, v.mean(axis=0))})
        pid_rows.append(row)
    return acc_rows, pid_rows


def _write_rows(path, rows):
    if not rows:
        Path(path).write_text("")
        return
    cols = list(rows[0])
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols) + "\n")


def compare(run_dirs, out_dir) -> dict:
    """Merge run directories into accuracy/PID summary CSVs and two SVG charts."""
    reports = [TrainReport.read(d) for d in run_dirs]
    acc_rows, pid_rows = aggregate_reports(reports)
    out = resolve_out(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "accuracy_summary.csv", acc_rows)
    _write_rows(out / "pid_summary.csv", pid_rows)

    def series(rows, ycol, band=None):
        groups: dict = {}
        for r in rows:
            groups.setdefault(f"{r['framework']} ({r['teacher_mode']})", []).append(r)
        return [Series(k, [r["epoch"] for r in v], [r[ycol] for r in v], [r[band] for r in v] if band else None)
                for k, v in groups.items()]

    write_svg(Chart("Student test accuracy", "epoch", "accuracy", series(acc_rows, "acc_mean", "acc_std")),
              out / "accuracy.svg")
    write_svg(Chart("Redundant information Red(Y:T,S)", "epoch", "bits", series(pid_rows, "red")),
              out / "pid.svg")
    final = {}
    for r in acc_rows:
        final[(r["teacher_mode"], r["framework"])] = r
    return {"final_accuracy": {f"{m}/{f}": {"mean": r["acc_mean"], "std": r["acc_std"], "epoch": r["epoch"]}
                               for (m, f), r in final.items()},
            "outputs": [str(out / n) for n in ("accuracy_summary.csv", "pid_summary.csv",
                                                "accuracy.svg", "pid.svg")]}
