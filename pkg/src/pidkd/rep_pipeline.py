"""Discretize continuous representations and compute their PID.

flatten -> PCA per variable -> k-means per variable (on the PCA scores)
-> empirical joint of (Y, cluster(T), cluster(S)) -> BROJA atoms.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .info_core import joint_from_samples
from .pid_broja import PidAtoms, SolverOptions, pid

log = logging.getLogger(__name__)


@dataclass
class RepDump:
    t: np.ndarray
    s: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = _flatten(self.t)
        self.s = _flatten(self.s)
        self.y = np.asarray(self.y).astype(int).ravel()
        if not (len(self.t) == len(self.s) == len(self.y)):
            raise ValueError(f"row counts differ: T {len(self.t)}, S {len(self.s)}, Y {len(self.y)}")


def _flatten(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.reshape(len(x), -1)


# --- PCA --------------------------------------------------------------------

@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (n_components, d), orthonormal rows
    explained_variance: np.ndarray


def pca_fit(x, n_components: int = 10) -> PcaModel:
    """Top eigenvectors of the sample covariance (d x d eigendecomposition)."""
    x = _flatten(x)
    n, d = x.shape
    if n_components > d:
        log.info("PCA: lowering n_components %d -> %d (feature count)", n_components, d)
        n_components = d
    if n < 2:
        raise ValueError("PCA needs at least two samples")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    vals, vecs = np.linalg.eigh(cov)
    # descending variance; stable sort keeps index order among equal (e.g. zero) eigenvalues
    order = np.argsort(-vals, kind="stable")
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order].T
    # deterministic sign: largest-magnitude entry positive
    idx = np.argmax(np.abs(vecs), axis=1)
    signs = np.sign(vecs[np.arange(d), idx])
    vecs *= np.where(signs == 0, 1.0, signs)[:, None]
    return PcaModel(mean, vecs[:n_components], vals[:n_components])


def pca_transform(model: PcaModel, x) -> np.ndarray:
    return (_flatten(x) - model.mean) @ model.components.T


# --- k-means ------------------------------------------------------------

@dataclass
class KMeansModel:
    centroids: np.ndarray
    inertia: float

    @property
    def k(self) -> int:
        return len(self.centroids)


def _sq_dists(x, c):
    d = (x * x).sum(axis=1)[:, None] - 2 * x @ c.T + (c * c).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_assign(model: KMeansModel, x) -> np.ndarray:
    """Nearest centroid; ties go to the lowest centroid index."""
    return np.argmin(_sq_dists(_flatten(x), model.centroids), axis=1)


def _plus_plus(x, k, rng):
    n = len(x)
    centers = [x[rng.integers(n)]]
    d2 = _sq_dists(x, np.array(centers))[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            i = rng.integers(n)
        else:
            i = rng.choice(n, p=d2 / total)
        centers.append(x[i])
        d2 = np.minimum(d2, _sq_dists(x, x[i:i + 1])[:, 0])
    return np.array(centers)


def _lloyd(x, centers, max_iters):
    k = len(centers)
    labels = None
    for _ in range(max_iters):
        d2 = _sq_dists(x, centers)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=k)
        for j in np.flatnonzero(counts == 0):
            # reseed an empty cluster at the point farthest from its centroid
            far = int(np.argmax(d2[np.arange(len(x)), new]))
            new[far] = j
            d2[far] = 0.0
            counts = np.bincount(new, minlength=k)
        centers = np.array([x[new == j].mean(axis=0) for j in range(k)])
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
    d2 = _sq_dists(x, centers)
    labels = np.argmin(d2, axis=1)
    return centers, float(d2[np.arange(len(x)), labels].sum())


def kmeans_fit(x, k: int = 10, max_iters: int = 300, restarts: int = 5, seed: int = 0) -> KMeansModel:
    """Lloyd's algorithm from k-means++ seeds; best restart by inertia."""
    x = _flatten(x)
    if len(x) < k:
        raise ValueError(f"k-means needs at least k={k} samples, got {len(x)}")
    distinct = len(np.unique(x, axis=0))
    if distinct < k:
        warnings.warn(f"only {distinct} distinct points; reducing k from {k}", RuntimeWarning)
        k = distinct
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        centers, inertia = _lloyd(x, _plus_plus(x, k, rng), max_iters)
        if best is None or inertia < best.inertia:
            best = KMeansModel(centers, inertia)
    return best


# --- pipeline -----------------------------------------------------------

@dataclass
class PipelineResult:
    atoms: PidAtoms
    k_t: int
    k_s: int
    n_components_t: int
    n_components_s: int
    n_samples: int
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        out = self.atoms.as_dict()
        out.update({"k_t": self.k_t, "k_s": self.k_s, "n_components_t": self.n_components_t,
                    "n_components_s": self.n_components_s, "n_samples": self.n_samples,
                    "warnings": list(self.warnings)})
        return out


def discretize(x, n_components: int = 10, k: int = 10, seed: int = 0):
    """PCA scores clustered into at most k symbols; returns (labels, pca, kmeans)."""
    model = pca_fit(x, n_components)
    scores = pca_transform(model, x)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        km = kmeans_fit(scores, k=k, seed=seed)
    for w in caught:
        log.warning("%s", w.message)
    return kmeans_assign(km, scores), model, km


def pipeline_pid(dump: RepDump, n_components: int = 10, k: int = 10, seed: int = 0,
                 n_classes: int | None = None, opts: SolverOptions | None = None) -> PipelineResult:
    lab_t, pca_t, km_t = discretize(dump.t, n_components, k, seed)
    lab_s, pca_s, km_s = discretize(dump.s, n_components, k, seed + 1)
    n_y = n_classes or int(dump.y.max()) + 1
    joint = joint_from_samples(np.stack([dump.y, lab_t, lab_s], axis=1), (n_y, km_t.k, km_s.k))
    notes = []
    n = len(dump.y)
    if n < 10 * k * k:
        notes.append(f"low sample count: {n} < 10*k^2 = {10 * k * k}")
    return PipelineResult(pid(joint, opts), km_t.k, km_s.k, len(pca_t.components),
                          len(pca_s.components), n, notes)


# --- CSV dumps ----------------------------------------------------------

def load_matrix_csv(path) -> np.ndarray:
    """Numeric CSV, optional single header row."""
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(v) for v in first.strip().split(",")]
        skip = 0
    except ValueError:
        skip = 1
    return np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)


def save_matrix_csv(path, x, prefix="f"):
    x = _flatten(x)
    header = ",".join(f"{prefix}{i}" for i in range(x.shape[1]))
    np.savetxt(path, x, delimiter=",", header=header, comments="", fmt="%.10g")
