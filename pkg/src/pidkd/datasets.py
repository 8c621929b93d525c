"""Synthetic generators: the worked example triples, the nuisance-teacher
construction, and a Gaussian-blob classification task for training runs."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .info_core import Joint3, entropy


@dataclass
class LabeledData:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    n_classes: int
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        for split, y in (("train", self.y_train), ("test", self.y_test)):
            counts = np.bincount(y, minlength=self.n_classes)
            if np.any(counts < 1):
                raise ValueError(f"{split} split misses a class: {counts}")
        if not (np.all(np.isfinite(self.x_train)) and np.all(np.isfinite(self.x_test))):
            raise ValueError("non-finite features")

    @property
    def dim(self) -> int:
        return self.x_train.shape[1]


def _from_outcomes(outcomes, cards) -> Joint3:
    p = np.zeros(cards)
    for (y, t, s), w in outcomes:
        p[y, t, s] += w
    return Joint3(p)


def make_example_triple(which: int, n_samples: int = 0, seed: int = 0, s_choice: str | None = None):
    """Exact Joint3 for a worked example, plus optional samples from it.

    1: Y=U1, T=U2 (uninformative teacher); S=U1 by default, or "u2".
    2: U1~Ber(0.2), Y=U1, T=(U1,U2) as 2*U1+U2; S=U1 by default, or "u2".
    3: Y=U1, T=U1 xor U2, S=U2.
    """
    def ber(q):
        return ((0, 1 - q), (1, q))

    if which == 1:
        s_choice = s_choice or "u1"
        out = []
        for u1, w1 in ber(0.5):
            for u2, w2 in ber(0.5):
                s = {"u1": u1, "u2": u2}[s_choice]
                out.append(((u1, u2, s), w1 * w2))
        joint = _from_outcomes(out, (2, 2, 2))
    elif which == 2:
        s_choice = s_choice or "u1"
        out = []
        for u1, w1 in ber(0.2):
            for u2, w2 in ber(0.5):
                s = {"u1": u1, "u2": u2}[s_choice]
                out.append(((u1, 2 * u1 + u2, s), w1 * w2))
        joint = _from_outcomes(out, (2, 4, 2))
    elif which == 3:
        out = [((u1, u1 ^ u2, u2), 0.25) for u1 in (0, 1) for u2 in (0, 1)]
        joint = _from_outcomes(out, (2, 2, 2))
    else:
        raise ValueError(f"no example {which!r}; choose 1, 2 or 3")
    samples = sample_joint(joint, n_samples, seed) if n_samples else None
    return joint, samples


def sample_joint(joint: Joint3, n: int, seed: int = 0) -> np.ndarray:
    """n iid (y, t, s) index triples drawn from ``joint``."""
    rng = np.random.default_rng(seed)
    flat = rng.choice(joint.p.size, size=n, p=joint.p.ravel())
    return np.stack(np.unravel_index(flat, joint.p.shape), axis=1)


# --- nuisance teacher -----------------------------------------------------

@dataclass
class NuisanceTask:
    data: LabeledData
    z_card: int
    g_card: int
    joint_s_is_z: Joint3
    joint_s_is_g: Joint3
    teacher_joint: np.ndarray  # p[y, z, g]
    z_train: np.ndarray
    g_train: np.ndarray


def _card_for_bits(bits: float) -> int:
    card = int(round(2 ** bits))
    if card < 1 or abs(np.log2(card) - bits) > 0.05:
        raise ValueError(f"entropy target {bits} bits is not realizable with a uniform alphabet")
    return card


def nuisance_joints(p_z, p_g, y_of_z=None):
    """Exact (Y, T=(Z,G), S) joints with G independent of (Y, Z) and Y = y_of_z[Z].

    Returns (p[y,z,g], Joint3 with S=Z, Joint3 with S=G). T is encoded as
    z * |G| + g. ``y_of_z`` defaults to the identity (Y = Z).
    """
    p_z, p_g = np.asarray(p_z, float), np.asarray(p_g, float)
    zc, gc = len(p_z), len(p_g)
    y_of_z = np.arange(zc) if y_of_z is None else np.asarray(y_of_z, int)
    yc = int(y_of_z.max()) + 1
    pyzg = np.zeros((yc, zc, gc))
    with_z = np.zeros((yc, zc * gc, zc))
    with_g = np.zeros((yc, zc * gc, gc))
    for z in range(zc):
        y = y_of_z[z]
        for g in range(gc):
            w = p_z[z] * p_g[g]
            pyzg[y, z, g] += w
            with_z[y, z * gc + g, z] += w
            with_g[y, z * gc + g, g] += w
    return pyzg, Joint3(with_z), Joint3(with_g)


def make_nuisance_task(h_z_bits: float = 1.0, h_g_bits: float = 2.0, n_samples: int = 2000,
                       seed: int = 0, jitter: float = 0.1, test_frac: float = 0.5) -> NuisanceTask:
    """T=(Z,G): Z carries the label (Y=Z), G is independent noise.

    Inputs are one-hot(Z) ++ one-hot(G) plus Gaussian jitter, so a network has
    to learn which half matters.
    """
    zc, gc = _card_for_bits(h_z_bits), _card_for_bits(h_g_bits)
    pyzg, jz, jg = nuisance_joints(np.full(zc, 1 / zc), np.full(gc, 1 / gc))
    rng = np.random.default_rng(seed)
    n_test = int(n_samples * test_frac)
    n_train = n_samples - n_test

    def draw(n):
        # stratified over Z so every class appears in each split
        z = np.resize(np.arange(zc), n)
        rng.shuffle(z)
        g = rng.integers(0, gc, size=n)
        x = np.concatenate([np.eye(zc)[z], np.eye(gc)[g]], axis=1)
        return x + jitter * rng.standard_normal(x.shape), z, g

    x_tr, z_tr, g_tr = draw(n_train)
    x_te, z_te, _ = draw(n_test)
    spec = {"generator": "nuisance", "h_z_bits": h_z_bits, "h_g_bits": h_g_bits,
            "n_samples": n_samples, "seed": seed, "jitter": jitter}
    data = LabeledData(x_tr, z_tr, x_te, z_te, zc, spec)
    return NuisanceTask(data, zc, gc, jz, jg, pyzg, z_tr, g_tr)


def teacher_source_entropies(task: NuisanceTask) -> tuple[float, float]:
    """(H(Z), H(G)) of the exact construction."""
    p = task.teacher_joint
    return entropy(p.sum(axis=(0, 2))), entropy(p.sum(axis=(0, 1)))


# --- Gaussian blobs -------------------------------------------------------

def make_blobs(n_classes: int = 10, dim: int = 16, n_train: int = 2000, n_test: int = 1000,
               spread: float = 0.5, seed: int = 0, nuisance_dims: int = 16,
               nuisance_scale: float = 3.0) -> LabeledData:
    """Gaussian class clusters with stratified train/test splits.

    Class means are drawn on the unit sphere scaled by 2; ``spread`` is the
    per-coordinate noise std. ``nuisance_dims`` appends label-independent
    Gaussian coordinates of std ``nuisance_scale``; they dominate the input
    variance, so an untrained network's features carry almost no label
    information while a trained one learns to ignore them.
    """
    if min(n_classes, dim, n_train, n_test) <= 0 or spread < 0:
        raise ValueError("blob parameters must be positive")
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((n_classes, dim))
    means = 2.0 * means / np.linalg.norm(means, axis=1, keepdims=True)

    def draw(n):
        y = np.resize(np.arange(n_classes), n)
        rng.shuffle(y)
        x = means[y] + spread * rng.standard_normal((n, dim))
        if nuisance_dims:
            x = np.concatenate([x, nuisance_scale * rng.standard_normal((n, nuisance_dims))], axis=1)
        return x, y

    x_tr, y_tr = draw(n_train)
    x_te, y_te = draw(n_test)
    spec = {"generator": "blobs", "n_classes": n_classes, "dim": dim, "n_train": n_train,
            "n_test": n_test, "spread": spread, "seed": seed,
            "nuisance_dims": nuisance_dims, "nuisance_scale": nuisance_scale}
    return LabeledData(x_tr, y_tr, x_te, y_te, n_classes, spec)


def make_dataset(spec: dict) -> LabeledData:
    spec = dict(spec)
    kind = spec.pop("generator", "blobs")
    if kind == "blobs":
        return make_blobs(**spec)
    if kind == "nuisance":
        return make_nuisance_task(**spec).data
    raise ValueError(f"unknown dataset generator {kind!r}")


# --- files ----------------------------------------------------------------

def save_dataset(data: LabeledData, out_dir) -> list[Path]:
    """Write train.csv / test.csv (label in the last column) plus a JSON sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    header = [f"x{i}" for i in range(data.dim)] + ["label"]
    for split, x, y in (("train", data.x_train, data.y_train), ("test", data.x_test, data.y_test)):
        path = out_dir / f"{split}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row, lab in zip(x, y):
                w.writerow([repr(float(v)) for v in row] + [int(lab)])
        paths.append(path)
    side = out_dir / "dataset.json"
    side.write_text(json.dumps({"n_classes": data.n_classes, "spec": data.spec}, indent=2))
    paths.append(side)
    return paths


def load_dataset(in_dir) -> LabeledData:
    in_dir = Path(in_dir)
    meta = json.loads((in_dir / "dataset.json").read_text())
    parts = []
    for split in ("train", "test"):
        arr = np.loadtxt(in_dir / f"{split}.csv", delimiter=",", skiprows=1, ndmin=2)
        parts += [arr[:, :-1], arr[:, -1].astype(int)]
    return LabeledData(*parts, meta["n_classes"], meta.get("spec", {}))

