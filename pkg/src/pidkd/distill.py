"""Distillation frameworks over small dense networks.

RID   alternating two-phase training: teacher-side filters learn the task
      while staying close to the student's filtered representation; then the
      student (and its filters and sigma weights) is pulled toward the
      teacher's filtered representation.
VID   Gaussian variational matching of teacher taps from student taps.
TED   task-aware filters on both sides (stage 1), then plain MSE alignment
      (stage 2), applied on top of a baseline-trained student.
BAS   the student trained on cross-entropy only.

Representations are flat: channel c of a layer is unit c, so the
per-channel sums of the losses run over units.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .datasets import LabeledData, make_dataset
from .info_core import joint_from_samples
from .nn_toy import SGD, Network, SigmaVec, accuracy, cross_entropy
from .pid_broja import pid
from .rep_pipeline import discretize

FRAMEWORKS = ("RID", "VID", "TED", "BAS")
VID_SIGMA_FLOOR = 1e-3


# ---------------------------------------------------------------------------
# losses on arrays
# ---------------------------------------------------------------------------

def _check_same(a, b, what):
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def weighted_sq(ft, fs, sigma):
    """sum_c E[(ft - fs)_c^2 / sigma_c] with the batch mean; plus d/dft and d/dsigma."""
    _check_same(ft, fs, "filter outputs")
    if sigma.shape != (ft.shape[1],):
        raise ValueError("sigma must have one entry per channel")
    n = len(ft)
    v = ft - fs
    v2 = (v * v).mean(axis=0)
    val = float(np.sum(v2 / sigma))
    d_ft = 2.0 * v / sigma / n
    d_sigma = -v2 / sigma ** 2
    return val, d_ft, d_sigma


def loss_rid_teacher(ft_out, gt_logits, fs_out, sigma, labels):
    """CE of the teacher-filter head plus the sigma-weighted deviation penalty.

    Returns (loss, d_logits, d_ft): gradients for g_t's output and the
    penalty part of the gradient at f_t's output. f_s and sigma are constants.
    """
    ce, d_logits = cross_entropy(gt_logits, labels)
    pen, d_ft, _ = weighted_sq(ft_out, fs_out, np.asarray(sigma, float))
    return ce + pen, d_logits, d_ft


def loss_rid_student(ft_out, fs_out, sigma):
    """||sigma||^2 + sum_c E[V_c^2 / sigma_c]; returns (loss, d_fs, d_sigma)."""
    sigma = np.asarray(sigma, float)
    pen, d_ft, d_sigma = weighted_sq(ft_out, fs_out, sigma)
    return float(sigma @ sigma) + pen, -d_ft, d_sigma + 2.0 * sigma


def loss_vid_term(t_tap, mu_out, sigma):
    """sum_c (log sigma_c + E[(T - mu)_c^2] / (2 sigma_c^2)); returns (val, d_mu, d_sigma)."""
    _check_same(t_tap, mu_out, "VID teacher tap vs mu(S)")
    sigma = np.asarray(sigma, float)
    if sigma.shape != (t_tap.shape[1],):
        raise ValueError("sigma must have one entry per teacher channel")
    n = len(t_tap)
    r = t_tap - mu_out
    r2 = (r * r).mean(axis=0)
    val = float(np.sum(np.log(sigma) + r2 / (2.0 * sigma ** 2)))
    d_mu = -r / sigma ** 2 / n
    d_sigma = 1.0 / sigma - r2 / sigma ** 3
    return val, d_mu, d_sigma


def loss_vid(t_taps, mu_outs, sigmas, labels, logits, lam):
    """CE + lam * sum over layer pairs of the VID term.

    Returns (loss, d_logits, [d_mu], [d_sigma]).
    """
    ce, d_logits = cross_entropy(logits, labels)
    total, d_mus, d_sigmas = ce, [], []
    for t, mu, sg in zip(t_taps, mu_outs, sigmas):
        val, d_mu, d_sigma = loss_vid_term(t, mu, sg)
        total += lam * val
        d_mus.append(lam * d_mu)
        d_sigmas.append(lam * d_sigma)
    return total, d_logits, d_mus, d_sigmas


def loss_ted_stage1(ft_logits, fs_logits, labels):
    """CE of both filter heads; returns (loss, d_ft_logits, d_fs_logits)."""
    a, ga = cross_entropy(ft_logits, labels)
    b, gb = cross_entropy(fs_logits, labels)
    return a + b, ga, gb


def loss_ted_stage2(ft_out, fs_out):
    """E||ft - fs||^2 (sum over channels, batch mean); returns (loss, d_fs)."""
    _check_same(ft_out, fs_out, "TED filter outputs")
    v = ft_out - fs_out
    return float((v * v).sum(axis=1).mean()), -2.0 * v / len(v)


class TedOrderError(RuntimeError):
    pass


class TedState:
    """Guards the TED stage order: stage 2 needs completed stage 1."""

    def __init__(self):
        self.stage1_done = False

    def finish_stage1(self):
        self.stage1_done = True

    def stage2(self, ft_out, fs_out):
        if not self.stage1_done:
            raise TedOrderError("TED stage 2 called before stage 1 completed")
        return loss_ted_stage2(ft_out, fs_out)


# ---------------------------------------------------------------------------
# modules and per-batch objectives (these fill gradient buffers)
# ---------------------------------------------------------------------------

@dataclass
class Parts:
    """Per-layer-pair auxiliary modules of a framework."""
    f_t: list = field(default_factory=list)
    g_t: list = field(default_factory=list)
    f_s: list = field(default_factory=list)
    g_s: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    sigma: list = field(default_factory=list)

    def modules(self):
        return self.f_t + self.g_t + self.f_s + self.g_s + self.mu + self.sigma


def build_parts(framework, t_dims, s_dims, n_classes, channels, hidden, rng,
                filter_act="identity") -> Parts:
    parts = Parts()
    for k, (td, sd) in enumerate(zip(t_dims, s_dims)):
        if framework in ("RID", "TED"):
            # filters: two affine layers, no activation in between
            parts.f_t.append(Network.mlp([td, hidden, channels], rng, hidden_act=filter_act, name=f"f_t{k}"))
            parts.g_t.append(Network.mlp([channels, n_classes], rng, name=f"g_t{k}"))
            parts.f_s.append(Network.mlp([sd, hidden, channels], rng, hidden_act=filter_act, name=f"f_s{k}"))
        if framework == "RID":
            parts.sigma.append(SigmaVec(channels))
        if framework == "TED":
            parts.g_s.append(Network.mlp([channels, n_classes], rng, name=f"g_s{k}"))
        if framework == "VID":
            parts.mu.append(Network.mlp([sd, hidden, td], rng, name=f"mu{k}"))
            parts.sigma.append(SigmaVec(td, init=1.0, floor=VID_SIGMA_FLOOR))
    return parts


def obj_filter_ce(t_taps, parts: Parts, y):
    """Warm-up: sum_k CE(g_t(f_t(T_k))); grads into f_t, g_t."""
    total = 0.0
    for k, t in enumerate(t_taps):
        h, _ = parts.f_t[k].forward(t)
        logits, _ = parts.g_t[k].forward(h)
        ce, d = cross_entropy(logits, y)
        total += ce
        parts.f_t[k].backward(parts.g_t[k].backward(d))
    return total


def obj_rid_phase1(t_taps, s_taps, parts: Parts, y):
    """sum_k L_t: grads into f_t, g_t only (f_s, sigma held fixed).

    Returns (loss, head CE part, penalty part).
    """
    total = ce = 0.0
    for k, (t, s) in enumerate(zip(t_taps, s_taps)):
        fs, _ = parts.f_s[k].forward(s)
        ft, _ = parts.f_t[k].forward(t)
        logits, _ = parts.g_t[k].forward(ft)
        loss, d_logits, d_ft = loss_rid_teacher(ft, logits, fs, parts.sigma[k].value, y)
        total += loss
        ce += cross_entropy(logits, y)[0]
        d_ft = d_ft + parts.g_t[k].backward(d_logits)
        parts.f_t[k].backward(d_ft)
    return total, ce, total - ce


def obj_rid_phase2(x, y, student: Network, t_taps, parts: Parts, pairs, lam1, lam2):
    """lam1 CE(student) + lam2 sum_k L_s; grads into student, f_s, sigma."""
    logits, s_taps = student.forward(x)
    ce, d_logits = cross_entropy(logits, y)
    tap_grads = [None] * len(student.taps)
    distill = 0.0
    for k, (ti, si) in enumerate(pairs):
        ft, _ = parts.f_t[k].forward(t_taps[ti])
        fs, _ = parts.f_s[k].forward(s_taps[si])
        val, d_fs, d_sigma = loss_rid_student(ft, fs, parts.sigma[k].value)
        distill += val
        parts.sigma[k].grad += lam2 * d_sigma * parts.sigma[k].dvalue_draw()
        g = parts.f_s[k].backward(lam2 * d_fs)
        tap_grads[si] = g if tap_grads[si] is None else tap_grads[si] + g
    student.backward(lam1 * d_logits, tap_grads)
    return lam1 * ce + lam2 * distill, ce, distill


def obj_vid(x, y, student: Network, t_taps, parts: Parts, pairs, lam):
    logits, s_taps = student.forward(x)
    mus = [parts.mu[k].forward(s_taps[si])[0] for k, (_, si) in enumerate(pairs)]
    loss, d_logits, d_mus, d_sigmas = loss_vid(
        [t_taps[ti] for ti, _ in pairs], mus, [s.value for s in parts.sigma], y, logits, lam)
    tap_grads = [None] * len(student.taps)
    for k, (_, si) in enumerate(pairs):
        parts.sigma[k].grad += d_sigmas[k] * parts.sigma[k].dvalue_draw()
        g = parts.mu[k].backward(d_mus[k])
        tap_grads[si] = g if tap_grads[si] is None else tap_grads[si] + g
    student.backward(d_logits, tap_grads)
    ce = cross_entropy(logits, y)[0]
    return loss, ce, (loss - ce) / lam if lam else 0.0


def obj_ted_stage1(t_taps, s_taps, parts: Parts, y):
    """Both filters with their heads; bodies fixed."""
    total = 0.0
    for k, (t, s) in enumerate(zip(t_taps, s_taps)):
        ft, _ = parts.f_t[k].forward(t)
        fs, _ = parts.f_s[k].forward(s)
        lt, _ = parts.g_t[k].forward(ft)
        ls, _ = parts.g_s[k].forward(fs)
        loss, d_t, d_s = loss_ted_stage1(lt, ls, y)
        total += loss
        parts.f_t[k].backward(parts.g_t[k].backward(d_t))
        parts.f_s[k].backward(parts.g_s[k].backward(d_s))
    return total


def obj_ted_stage2(x, y, student: Network, t_taps, parts: Parts, pairs, lam1, lam2, state: TedState):
    logits, s_taps = student.forward(x)
    ce, d_logits = cross_entropy(logits, y)
    tap_grads = [None] * len(student.taps)
    distill = 0.0
    for k, (ti, si) in enumerate(pairs):
        ft, _ = parts.f_t[k].forward(t_taps[ti])
        fs, _ = parts.f_s[k].forward(s_taps[si])
        val, d_fs = state.stage2(ft, fs)
        distill += val
        g = parts.f_s[k].backward(lam2 * d_fs)
        tap_grads[si] = g if tap_grads[si] is None else tap_grads[si] + g
    student.backward(lam1 * d_logits, tap_grads)
    return lam1 * ce + lam2 * distill, ce, distill


def obj_ce(x, y, net: Network):
    logits, _ = net.forward(x)
    ce, d = cross_entropy(logits, y)
    net.backward(d)
    return ce


# ---------------------------------------------------------------------------
# configuration and report
# ---------------------------------------------------------------------------

@dataclass
class DistillConfig:
    name: str = "run"
    framework: str = "RID"
    teacher_mode: str = "trained"
    seed: int = 0
    lambda1: float = 1.0
    lambda2: float = 0.02
    vid_lambda: float = 0.1
    n_epochs: int = 150  # total epochs, RID warm-up included
    n_warmup: int = 15
    cycle_len: int = 15
    alt_ratio: float = 0.25
    layer_pairs: list = field(default_factory=lambda: [[0, 0], [1, 1], [2, 2]])
    teacher_hidden: list = field(default_factory=lambda: [64, 64, 64])
    student_hidden: list = field(default_factory=lambda: [16, 16, 16])
    filter_channels: int = 16
    filter_hidden: int = 32
    filter_act: str = "identity"
    teacher_epochs: int = 60
    teacher_n_train: int = 10000  # >0: teacher trains on a larger draw from the same generator
    ted_base_epochs: int = 75
    lr: float = 0.05
    lr_milestones: list = field(default_factory=lambda: [75, 100])
    lr_values: list = field(default_factory=lambda: [0.01, 0.002])
    momentum: float = 0.9
    weight_decay: float = 5e-4
    nesterov: bool = True
    batch_size: int = 64
    clip_norm: float | None = 5.0
    pid_every: int = 10
    pid_pair: int = -1
    pid_k: int = 10
    pid_components: int = 10
    dataset: dict = field(default_factory=lambda: {"generator": "blobs"})

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.framework not in FRAMEWORKS:
            raise ValueError(f"framework must be one of {FRAMEWORKS}")
        if self.teacher_mode not in ("trained", "untrained"):
            raise ValueError("teacher_mode must be 'trained' or 'untrained'")
        if not 0 < self.alt_ratio < 1:
            raise ValueError("alt_ratio must lie in (0, 1)")
        n = self.n_epochs - (self.n_warmup if self.framework == "RID" else 0)
        if self.framework == "RID" and not 1 <= self.cycle_len <= n:
            raise ValueError("cycle_len must satisfy 1 <= q <= n")
        if not self.layer_pairs:
            raise ValueError("need at least one distilled layer pair")
        if self.framework != "BAS":
            if min(self.lambda1, self.vid_lambda) <= 0:
                raise ValueError("lambda1 and vid_lambda must be positive")
            if self.lambda2 < 0:  # 0 switches distillation off
                raise ValueError("lambda2 must be nonnegative")
        if len(self.lr_milestones) != len(self.lr_values):
            raise ValueError("lr_milestones and lr_values differ in length")
        if self.framework == "TED" and self.ted_base_epochs + self.n_warmup >= self.n_epochs:
            raise ValueError("TED needs epochs left for stage 2")

    @classmethod
    def from_dict(cls, obj: dict) -> "DistillConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known - {"schema_version"}
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**{k: v for k, v in obj.items() if k in known})

    def to_dict(self) -> dict:
        return {"schema_version": 1, **asdict(self)}


def rid_phase(i: int, q: int, r: float) -> int:
    """Phase (1 or 2) of post-warm-up epoch i (1-based) in cycles of q epochs."""
    return 1 if (i - 1) % q < math.ceil(r * q) else 2


def lr_at(cfg: DistillConfig, epoch: int) -> float:
    lr = cfg.lr
    for m, v in zip(cfg.lr_milestones, cfg.lr_values):
        if epoch > m:
            lr = v
    return lr


@dataclass
class TrainReport:
    config: dict
    epochs: list = field(default_factory=list)
    pid: list = field(default_factory=list)
    teacher_acc: float = float("nan")
    wall_time: float = 0.0

    def final_acc(self) -> float:
        return self.epochs[-1]["student_acc"]

    EPOCH_COLS = ("epoch", "phase", "lr", "student_acc", "teacher_acc", "loss", "ce", "distill")
    PID_COLS = ("epoch", "red", "uni_t", "uni_s", "syn", "mi_yt", "mi_ys", "mi_yts")

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "epochs.csv", self.EPOCH_COLS, self.epochs)
        _write_csv(out / "pid.csv", self.PID_COLS, self.pid)
        (out / "config.json").write_text(json.dumps(self.config, indent=2))
        summary = {"name": self.config.get("name"), "framework": self.config.get("framework"),
                   "teacher_mode": self.config.get("teacher_mode"), "seed": self.config.get("seed"),
                   "final_acc": self.final_acc(), "teacher_acc": self.teacher_acc,
                   "final_pid": self.pid[-1] if self.pid else None,
                   "n_epochs": len(self.epochs) - 1}
        (out / "summary.json").write_text(json.dumps(summary, indent=2))

    @classmethod
    def read(cls, run_dir) -> "TrainReport":
        run_dir = Path(run_dir)
        cfg = json.loads((run_dir / "config.json").read_text())
        summary = json.loads((run_dir / "summary.json").read_text())
        rep = cls(cfg, _read_csv(run_dir / "epochs.csv"), _read_csv(run_dir / "pid.csv"))
        rep.teacher_acc = summary.get("teacher_acc", float("nan"))
        return rep


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, cols, rows):
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r.get(c, "")) for c in cols) + "\n")


def _read_csv(path):
    path = Path(path)
    if not path.exists():
        return []
    lines = path.read_text().strip().splitlines()
    if not lines:
        return []
    cols = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        row = {}
        for c, v in zip(cols, line.split(",")):
            try:
                row[c] = int(v)
            except ValueError:
                try:
                    row[c] = float(v)
                except ValueError:
                    row[c] = v
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _streams(seed: int):
    """Independent RNG streams per component, keyed by the run seed."""
    names = ("teacher_init", "teacher_data", "student_init", "student_data", "aux_init", "aux_data")
    kids = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(k) for n, k in zip(names, kids)}


def build_teacher(cfg: DistillConfig, data: LabeledData, rng=None) -> Network:
    rng = rng or _streams(cfg.seed)["teacher_init"]
    sizes = [data.dim, *cfg.teacher_hidden, data.n_classes]
    return Network.mlp(sizes, rng, taps=range(len(cfg.teacher_hidden)), name="teacher")


def build_student(cfg: DistillConfig, data: LabeledData, rng=None) -> Network:
    rng = rng or _streams(cfg.seed)["student_init"]
    sizes = [data.dim, *cfg.student_hidden, data.n_classes]
    return Network.mlp(sizes, rng, taps=range(len(cfg.student_hidden)), name="student")


def _batches(n, bs, rng):
    order = rng.permutation(n)
    for i in range(0, n, bs):
        yield order[i:i + bs]


def train_classifier(net: Network, data: LabeledData, epochs: int, cfg: DistillConfig, rng) -> list:
    """Plain CE training (used for the teacher); returns per-epoch test accuracy."""
    opt = SGD([net], cfg.lr, cfg.momentum, cfg.weight_decay, cfg.nesterov, cfg.clip_norm)
    accs = []
    for ep in range(1, epochs + 1):
        opt.lr = cfg.lr if ep <= int(0.5 * epochs) else cfg.lr * 0.2
        for idx in _batches(len(data.y_train), cfg.batch_size, rng):
            obj_ce(data.x_train[idx], data.y_train[idx], net)
            opt.step()
        accs.append(evaluate(net, data.x_test, data.y_test))
    return accs


def teacher_data(cfg: DistillConfig, data: LabeledData) -> LabeledData:
    """Training data for the teacher: the student's data, or a larger draw."""
    if not cfg.teacher_n_train:
        return data
    spec = dict(data.spec or cfg.dataset)
    if spec.get("generator", "blobs") != "blobs":
        raise ValueError("teacher_n_train needs a blobs dataset spec")
    spec["n_train"] = cfg.teacher_n_train
    return make_dataset(spec)


def make_teacher(cfg: DistillConfig, data: LabeledData) -> Network:
    st = _streams(cfg.seed)
    teacher = build_teacher(cfg, data, st["teacher_init"])
    if cfg.teacher_mode == "trained":
        train_classifier(teacher, teacher_data(cfg, data), cfg.teacher_epochs, cfg, st["teacher_data"])
    return teacher


def evaluate(net: Network, x, y) -> float:
    return accuracy(net.forward(x)[0], y)


class _PidTracker:
    """PID of the chosen layer pair on the test split; teacher side clustered once."""

    def __init__(self, cfg, data, teacher_test_taps):
        self.cfg = cfg
        self.x = data.x_test
        self.y = data.y_test
        self.n_classes = data.n_classes
        ti, self.si = cfg.layer_pairs[cfg.pid_pair]
        self.t_lab, _, km = discretize(teacher_test_taps[ti], cfg.pid_components, cfg.pid_k, cfg.seed)
        self.k_t = km.k

    def __call__(self, student, epoch):
        _, s_taps = student.forward(self.x)
        s_lab, _, km = discretize(s_taps[self.si], self.cfg.pid_components, self.cfg.pid_k, self.cfg.seed + 1)
        joint = joint_from_samples(np.stack([self.y, self.t_lab, s_lab], axis=1),
                                   (self.n_classes, self.k_t, km.k))
        atoms = pid(joint)
        return {"epoch": epoch, **{k: float(v) for k, v in atoms.as_dict().items()
                                   if k in TrainReport.PID_COLS}}


def train(cfg: DistillConfig, data: LabeledData | None = None, teacher: Network | None = None,
          log_fn=None, hook=None) -> TrainReport:
    """Run one framework; the teacher is built (and trained) if not given.

    The teacher is never modified. ``hook(epoch, phase, student, parts)`` is
    called after initialization (epoch 0) and after every epoch.
    """
    t0 = time.time()
    cfg.validate()
    data = data if data is not None else make_dataset(cfg.dataset)
    st = _streams(cfg.seed)
    if teacher is None:
        teacher = make_teacher(cfg, data)
    teacher_before = teacher.get_flat()
    student = build_student(cfg, data, st["student_init"])
    pairs = [tuple(p) for p in cfg.layer_pairs]
    t_dims, s_dims = teacher.tap_dims(), student.tap_dims()
    parts = build_parts(cfg.framework, [t_dims[a] for a, _ in pairs], [s_dims[b] for _, b in pairs],
                        data.n_classes, cfg.filter_channels, cfg.filter_hidden, st["aux_init"],
                        cfg.filter_act)

    # teacher is frozen: its taps are computed once
    t_train = teacher.forward(data.x_train)[1]
    t_test = teacher.forward(data.x_test)[1]
    teacher_acc = evaluate(teacher, data.x_test, data.y_test)

    hp = dict(momentum=cfg.momentum, nesterov=cfg.nesterov, clip_norm=cfg.clip_norm)
    student_opt = SGD([student] + parts.f_s + parts.mu, cfg.lr, weight_decay=cfg.weight_decay, **hp)
    sigma_opt = SGD(parts.sigma, cfg.lr, weight_decay=0.0, **hp)
    filt_opt = SGD(parts.f_t + parts.g_t, cfg.lr, weight_decay=cfg.weight_decay, **hp)
    ted_s1_opt = SGD(parts.f_t + parts.g_t + parts.f_s + parts.g_s, cfg.lr,
                     weight_decay=cfg.weight_decay, **hp)
    ted_state = TedState()

    tracker = None
    if cfg.pid_every:
        tracker = _PidTracker(cfg, data, t_test)

    report = TrainReport(cfg.to_dict(), teacher_acc=teacher_acc)
    report.epochs.append({"epoch": 0, "phase": "init", "lr": cfg.lr,
                          "student_acc": evaluate(student, data.x_test, data.y_test),
                          "teacher_acc": teacher_acc, "loss": "", "ce": "", "distill": ""})
    if tracker:
        report.pid.append(tracker(student, 0))
    if hook:
        hook(0, "init", student, parts)

    n = len(data.y_train)
    for epoch in range(1, cfg.n_epochs + 1):
        lr = lr_at(cfg, epoch)
        for opt in (student_opt, sigma_opt, filt_opt, ted_s1_opt):
            opt.lr = lr
        phase = _phase_of(cfg, epoch)
        tot = ce_sum = dist_sum = 0.0
        nb = 0
        # the student's batch stream is consumed only when the student trains
        stream = st["student_data"] if phase in ("student", "rid2", "vid", "ted2") else st["aux_data"]
        for idx in _batches(n, cfg.batch_size, stream):
            x, y = data.x_train[idx], data.y_train[idx]
            tt = [t[idx] for t in t_train]
            if phase == "warmup":
                loss = obj_filter_ce(tt, parts, y)
                filt_opt.step()
                ce, dist = loss, 0.0
            elif phase == "rid1":
                s_taps = student.forward(x)[1]
                loss, ce, dist = obj_rid_phase1([tt[a] for a, _ in pairs], [s_taps[b] for _, b in pairs],
                                                parts, y)
                filt_opt.step()
            elif phase == "rid2":
                loss, ce, dist = obj_rid_phase2(x, y, student, tt, parts, pairs, cfg.lambda1, cfg.lambda2)
                student_opt.step()
                sigma_opt.step()
            elif phase == "vid":
                loss, ce, dist = obj_vid(x, y, student, tt, parts, pairs, cfg.vid_lambda)
                student_opt.step()
                sigma_opt.step()
            elif phase == "ted1":
                s_taps = student.forward(x)[1]
                loss = obj_ted_stage1([tt[a] for a, _ in pairs], [s_taps[b] for _, b in pairs], parts, y)
                ted_s1_opt.step()
                ce, dist = loss, 0.0
            elif phase == "ted2":
                loss, ce, dist = obj_ted_stage2(x, y, student, tt, parts, pairs, cfg.lambda1,
                                                cfg.lambda2, ted_state)
                student_opt.step()
            else:
                loss = ce = obj_ce(x, y, student)
                dist = 0.0
                student_opt.step()
            tot += loss
            ce_sum += ce
            dist_sum += dist
            nb += 1
        if phase == "ted1" and _phase_of(cfg, epoch + 1) != "ted1":
            ted_state.finish_stage1()
        rec = {"epoch": epoch, "phase": phase, "lr": lr,
               "student_acc": evaluate(student, data.x_test, data.y_test), "teacher_acc": teacher_acc,
               "loss": tot / nb, "ce": ce_sum / nb, "distill": dist_sum / nb}
        report.epochs.append(rec)
        if tracker and (epoch % cfg.pid_every == 0 or epoch == cfg.n_epochs):
            report.pid.append(tracker(student, epoch))
        if log_fn:
            log_fn(rec)
        if hook:
            hook(epoch, phase, student, parts)

    if not np.array_equal(teacher.get_flat(), teacher_before):
        raise RuntimeError("teacher parameters changed during distillation")
    report.wall_time = time.time() - t0
    report.student = student
    report.teacher = teacher
    report.parts = parts
    return report


def _phase_of(cfg: DistillConfig, epoch: int) -> str:
    fw = cfg.framework
    if fw == "BAS":
        return "student"
    if fw == "VID":
        return "vid"
    if fw == "RID":
        if epoch <= cfg.n_warmup:
            return "warmup"
        return "rid1" if rid_phase(epoch - cfg.n_warmup, cfg.cycle_len, cfg.alt_ratio) == 1 else "rid2"
    # TED: baseline epochs, then stage 1 (filters), then stage 2
    if epoch <= cfg.ted_base_epochs:
        return "student"
    if epoch <= cfg.ted_base_epochs + cfg.n_warmup:
        return "ted1"
    return "ted2"
