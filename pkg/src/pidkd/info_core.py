"""Exact discrete information quantities over dense probability tables.

All quantities are in bits. Cells below ``ZERO_CUTOFF`` are treated as exact
zeros before any logarithm is taken (0 log 0 = 0).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

SUM_TOL = 1e-12
ZERO_CUTOFF = 1e-15
# Loose acceptance for files/samples written with limited precision.
IO_SUM_TOL = 1e-9

AXES = {"y": 0, "t": 1, "s": 2}


class InvalidDistribution(ValueError):
    pass


def _check_prob(p: np.ndarray, tol: float = SUM_TOL) -> None:
    if p.size == 0:
        raise InvalidDistribution("empty distribution")
    if not np.all(np.isfinite(p)):
        raise InvalidDistribution("non-finite cell")
    if np.any(p < 0):
        raise InvalidDistribution(f"negative cell (min {p.min():.3g})")
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise InvalidDistribution(f"cells sum to {total!r}, not 1")


@dataclass(frozen=True)
class Joint2:
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2:
            raise InvalidDistribution("Joint2 needs a 2-d array")
        _check_prob(p)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def cards(self) -> tuple[int, int]:
        return self.p.shape


@dataclass(frozen=True)
class Joint3:
    """Joint distribution over Y x T x S, indexed ``p[y, t, s]``."""

    p: np.ndarray
    labels: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 3:
            raise InvalidDistribution("Joint3 needs a 3-d array")
        _check_prob(p)
        if self.labels is not None:
            if len(self.labels) != 3 or any(
                lab is not None and len(lab) != n for lab, n in zip(self.labels, p.shape)
            ):
                raise InvalidDistribution("label table does not match cardinalities")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def card_y(self) -> int:
        return self.p.shape[0]

    @property
    def card_t(self) -> int:
        return self.p.shape[1]

    @property
    def card_s(self) -> int:
        return self.p.shape[2]

    @classmethod
    def normalized(cls, weights, labels=None) -> "Joint3":
        """Build from nonnegative weights, renormalizing to sum 1."""
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or w.sum() <= 0:
            raise InvalidDistribution("weights must be nonnegative with positive mass")
        return cls(w / w.sum(), labels)

    # marginal views
    def p_yt(self) -> np.ndarray:
        return self.p.sum(axis=2)

    def p_ys(self) -> np.ndarray:
        return self.p.sum(axis=1)

    def p_ts(self) -> np.ndarray:
        return self.p.sum(axis=0)

    def p_y(self) -> np.ndarray:
        return self.p.sum(axis=(1, 2))

    def p_t(self) -> np.ndarray:
        return self.p.sum(axis=(0, 2))

    def p_s(self) -> np.ndarray:
        return self.p.sum(axis=(0, 1))

    def swap_sources(self) -> "Joint3":
        """Same distribution with the roles of T and S exchanged."""
        labels = None if self.labels is None else (self.labels[0], self.labels[2], self.labels[1])
        return Joint3(self.p.transpose(0, 2, 1), labels)

    def merge_ts(self) -> Joint2:
        """Joint of Y and the pair (T, S) flattened into one symbol."""
        return Joint2(self.p.reshape(self.card_y, -1))

    # --- serialization -------------------------------------------------
    def to_json(self) -> dict:
        return {"card": list(self.p.shape), "p": self.p.ravel().tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Joint3":
        try:
            card = [int(c) for c in obj["card"]]
            flat = np.asarray(obj["p"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidDistribution(f"malformed Joint3 JSON: {exc}") from exc
        if len(card) != 3 or min(card) < 1 or flat.size != int(np.prod(card)):
            raise InvalidDistribution(f"card {card} does not match {flat.size} cells")
        p = flat.reshape(card)
        _check_prob(p, IO_SUM_TOL)
        return cls(p / p.sum())


def _clean(p: np.ndarray) -> np.ndarray:
    return np.where(p < ZERO_CUTOFF, 0.0, p)


def _plogp(p: np.ndarray) -> float:
    p = _clean(np.asarray(p, dtype=float))
    nz = p[p > 0]
    return float(np.sum(nz * np.log2(nz)))


def _as_array(d) -> np.ndarray:
    if isinstance(d, (Joint2, Joint3)):
        return d.p
    p = np.asarray(d, dtype=float)
    _check_prob(p)
    return p


def entropy(d) -> float:
    """Shannon entropy in bits of any finite distribution (vector or table)."""
    return max(-_plogp(_as_array(d)), 0.0)


def mutual_info(d) -> float:
    """I(A:B) for a 2-d joint table indexed [a, b]."""
    p = _as_array(d)
    if p.ndim != 2:
        raise InvalidDistribution("mutual_info needs a 2-d joint")
    mi = entropy(p.sum(axis=1)) + entropy(p.sum(axis=0)) - entropy(p)
    return _clip_small(mi)


def _clip_small(v: float) -> float:
    # round-off only; a larger negative value is left visible
    return 0.0 if -1e-12 <= v < 0 else v


def _axes_spec(spec) -> tuple[int, ...]:
    if isinstance(spec, str):
        spec = list(spec)
    try:
        axes = tuple(AXES[a] if isinstance(a, str) else int(a) for a in spec)
    except KeyError as exc:
        raise ValueError(f"bad axis spec {spec!r}") from exc
    if len(set(axes)) != len(axes) or any(a not in (0, 1, 2) for a in axes):
        raise ValueError(f"bad axis spec {spec!r}")
    return axes


def marginalize(d: Joint3, keep) -> np.ndarray:
    """Marginal over the kept axes (e.g. ``"yt"`` or ``(0, 1)``), in kept order."""
    axes = _axes_spec(keep)
    if not axes:
        raise ValueError("must keep at least one axis")
    p = d.p if isinstance(d, Joint3) else np.asarray(d, dtype=float)
    drop = tuple(a for a in range(p.ndim) if a not in axes)
    m = p.sum(axis=drop)
    kept_sorted = sorted(axes)
    return np.transpose(m, [kept_sorted.index(a) for a in axes])


def cond_mutual_info(d, target_pair="yt", given="s") -> float:
    """I(A:B|C) for a 3-d table; default I(Y:T|S)."""
    p = d.p if isinstance(d, Joint3) else np.asarray(d, dtype=float)
    if p.ndim != 3:
        raise InvalidDistribution("cond_mutual_info needs a 3-d joint")
    a, b = _axes_spec(target_pair)
    (c,) = _axes_spec(given)
    if len({a, b, c}) != 3:
        raise ValueError("target pair and conditioning axis must be distinct")
    p = np.transpose(p, (a, b, c))
    cmi = entropy(p.sum(axis=1)) + entropy(p.sum(axis=0)) - entropy(p) - entropy(p.sum(axis=(0, 1)))
    return _clip_small(cmi)


def cond_mi_table(p: np.ndarray) -> float:
    """I(A:B|C) for a raw nonnegative table p[a, b, c] (no validation, fast path)."""
    p = _clean(p)
    p_ac = p.sum(axis=1, keepdims=True)
    p_bc = p.sum(axis=0, keepdims=True)
    p_c = p.sum(axis=(0, 1), keepdims=True)
    num = p * p_c
    den = p_ac * p_bc
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(num[mask] / den[mask])))


def joint_from_samples(samples, cards: Sequence[int], labels=None) -> Joint3:
    """Empirical Joint3 from (y, t, s) index triples."""
    arr = np.asarray(samples)
    if arr.size == 0:
        raise InvalidDistribution("no samples")
    arr = arr.reshape(-1, 3)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValueError("symbols must be integer indices")
        arr = arr.astype(int)
    cards = tuple(int(c) for c in cards)
    if len(cards) != 3 or min(cards) < 1:
        raise ValueError(f"bad cardinalities {cards}")
    if np.any(arr < 0) or np.any(arr >= np.array(cards)):
        raise ValueError("symbol outside its alphabet")
    counts = np.zeros(cards)
    np.add.at(counts, (arr[:, 0], arr[:, 1], arr[:, 2]), 1.0)
    return Joint3(counts / counts.sum(), labels)


# --- file formats --------------------------------------------------------

def load_joint(path) -> Joint3:
    """Read a Joint3 from ``.json`` ({"card", "p"}) or ``.csv`` (y,t,s,prob)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _load_csv(path)
    with open(path) as fh:
        return Joint3.from_json(json.load(fh))


def save_joint(d: Joint3, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y", "t", "s", "prob"])
            for (y, t, s), v in np.ndenumerate(d.p):
                if v > 0:
                    w.writerow([y, t, s, repr(float(v))])
        return
    with open(path, "w") as fh:
        json.dump(d.to_json(), fh)


def _load_csv(path: Path) -> Joint3:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().lower() == "y":
                continue
            if len(rec) != 4:
                raise InvalidDistribution(f"bad CSV row {rec}")
            rows.append((int(rec[0]), int(rec[1]), int(rec[2]), float(rec[3])))
    if not rows:
        raise InvalidDistribution("empty CSV distribution")
    idx = np.array([r[:3] for r in rows])
    if np.any(idx < 0):
        raise InvalidDistribution("negative symbol index")
    card = idx.max(axis=0) + 1
    p = np.zeros(card)
    for y, t, s, v in rows:
        p[y, t, s] += v
    _check_prob(p, IO_SUM_TOL)
    return Joint3(p / p.sum())
