"""BROJA partial information decomposition of a Y x T x S joint.

Unique information of T is the minimum of I_Q(Y:T|S) over the polytope of
joints Q sharing the (Y,T) and (Y,S) marginals of P. The minimization uses
entropic mirror descent; after every multiplicative step the iterate is
pulled back onto the polytope with iterative proportional fitting (IPF),
which is the KL projection onto the two marginal families.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .info_core import Joint3, cond_mi_table, mutual_info

log = logging.getLogger(__name__)

# cells below this are dropped; keeps products of cells out of the denormal range
TINY = 1e-250


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 5000
    step_size: float = 0.1
    step_growth: float = 1.5
    max_step: float = 50.0
    obj_tol: float = 1e-9
    marg_tol: float = 1e-10
    ipf_rounds: int = 50
    # consecutive accepted steps with change below obj_tol before stopping
    patience: int = 3

    def __post_init__(self):
        for name in ("max_iters", "step_size", "obj_tol", "marg_tol", "ipf_rounds", "max_step", "patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.step_growth < 1:
            raise ValueError("step_growth must be >= 1")


@dataclass
class SolverDiag:
    iterations: int
    objective: float
    violation: float
    converged: bool
    step_size: float


@dataclass
class PidAtoms:
    red: float
    uni_t: float
    uni_s: float
    syn: float
    mi_yt: float
    mi_ys: float
    mi_yts: float
    diag: SolverDiag | None = None
    # unclipped atom values, kept so a solver failure is not masked
    raw: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("red", "uni_t", "uni_s", "syn", "mi_yt", "mi_ys", "mi_yts")}
        if self.diag is not None:
            out["solver"] = asdict(self.diag)
        if self.raw:
            out["raw"] = dict(self.raw)
        return out


def feasible_init(p: Joint3) -> Joint3:
    """Conditional-independence coupling P(y,t) P(y,s) / P(y)."""
    return Joint3(_ci_coupling(p.p))


def _ci_coupling(p: np.ndarray) -> np.ndarray:
    p_yt = p.sum(axis=2)
    p_ys = p.sum(axis=1)
    p_y = p_yt.sum(axis=1)
    inv = np.divide(1.0, p_y, out=np.zeros_like(p_y), where=p_y > 0)
    return p_yt[:, :, None] * p_ys[:, None, :] * inv[:, None, None]


def _violation(q, p_yt, p_ys) -> float:
    return float(max(np.abs(q.sum(axis=2) - p_yt).max(), np.abs(q.sum(axis=1) - p_ys).max()))


def _ipf(q, p_yt, p_ys, rounds, tol):
    for _ in range(rounds):
        m = q.sum(axis=2)
        q = q * np.divide(p_yt, m, out=np.zeros_like(m), where=m > 0)[:, :, None]
        m = q.sum(axis=1)
        q = q * np.divide(p_ys, m, out=np.zeros_like(m), where=m > 0)[:, None, :]
        # (Y,S) is exact after the last scaling; only (Y,T) can be off
        if np.abs(q.sum(axis=2) - p_yt).max() < tol:
            break
    return q


def _newton_scale(k, r, c, tol, max_iter=100):
    """Scale k to row sums r, column sums c: Q = diag(e^u) k diag(e^v).

    Newton ascent on the concave dual; converges where IPF crawls (a target
    that needs mass moved through a nearly empty cell).
    """
    rows, cols = r > 0, c > 0
    kk = k[np.ix_(rows, cols)]
    rr, cc = r[rows], c[cols]
    nr, nc = kk.shape
    u, v = np.zeros(nr), np.zeros(nc)

    def dual(u, v):
        with np.errstate(over="ignore"):
            return rr @ u + cc @ v - (kk * np.exp(u[:, None] + v[None, :])).sum()

    for _ in range(max_iter):
        q = kk * np.exp(u[:, None] + v[None, :])
        gr, gc = rr - q.sum(axis=1), cc - q.sum(axis=0)
        if max(np.abs(gr).max(), np.abs(gc).max()) < tol:
            break
        h = np.zeros((nr + nc, nr + nc))
        h[:nr, :nr] = np.diag(q.sum(axis=1))
        h[nr:, nr:] = np.diag(q.sum(axis=0))
        h[:nr, nr:] = q
        h[nr:, :nr] = q.T
        g = np.concatenate([gr, gc])
        # the all-(+1,-1) direction is flat; pin it with a tiny ridge
        try:
            step = np.linalg.lstsq(h + 1e-14 * np.eye(nr + nc), g, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        t, base = 1.0, dual(u, v)
        while t > 1e-10:
            nu, nv = u + t * step[:nr], v + t * step[nr:]
            if dual(nu, nv) >= base:
                break
            t *= 0.5
        u, v = nu, nv
    out = np.zeros_like(k)
    out[np.ix_(rows, cols)] = kk * np.exp(u[:, None] + v[None, :])
    return out


def _project(q, p_yt, p_ys, rounds, tol):
    """KL projection onto the marginal polytope: IPF, then Newton if needed."""
    q = _ipf(q, p_yt, p_ys, rounds, tol)
    if _violation(q, p_yt, p_ys) <= tol:
        return q
    out = np.empty_like(q)
    for y in range(q.shape[0]):
        out[y] = _newton_scale(q[y], p_yt[y], p_ys[y], tol * 0.1)
    if not np.all(np.isfinite(out)):
        return q  # the caller sees the violation and rejects the step
    return out


def _gradient(q):
    """d I_Q(Y:T|S) / dQ in bits, on the support of q."""
    q_s = q.sum(axis=(0, 1))[None, None, :]
    q_ys = q.sum(axis=1)[:, None, :]
    q_ts = q.sum(axis=0)[None, :, :]
    mask = q > 0
    g = np.zeros_like(q)
    # sum of logs rather than log of a product: tiny cells would underflow
    for term, sign in ((q, 1.0), (q_s, 1.0), (q_ys, -1.0), (q_ts, -1.0)):
        g[mask] += sign * np.log2(np.broadcast_to(term, q.shape)[mask])
    return g


def solve_unique(p: Joint3, opts: SolverOptions | None = None):
    """Minimize I_Q(Y:T|S) over the marginal polytope of ``p``.

    Returns ``(value_bits, Q, diag)``. On hitting ``max_iters`` the best
    iterate is returned with ``diag.converged = False``.
    """
    opts = opts or SolverOptions()
    arr = p.p
    live = arr.sum(axis=(1, 2)) > 0
    sub = arr[live]
    p_yt = sub.sum(axis=2)
    p_ys = sub.sum(axis=1)
    q = _ci_coupling(sub)
    obj = cond_mi_table(q)
    best_q, best_obj = q, obj
    eta = opts.step_size
    converged = obj <= opts.obj_tol
    calm = 0
    it = 0
    while not converged and it < opts.max_iters:
        it += 1
        g = _gradient(q)
        g -= g[q > 0].min()  # IPF removes the scale; keeps the exponent <= 0
        # bounded shrink per step so no live cell underflows to a hard zero
        cand = q * np.exp(np.maximum(-eta * g, -30.0))
        cand[cand < TINY] = 0.0
        cand = _project(cand, p_yt, p_ys, opts.ipf_rounds, opts.marg_tol)
        new = cond_mi_table(cand)
        # a step IPF cannot pull back onto the polytope counts as a failed step
        if new > obj + 1e-15 or _violation(cand, p_yt, p_ys) > opts.marg_tol:
            eta *= 0.5
            calm = 0
            if eta < 1e-12:
                converged = True
            continue
        change = obj - new
        q, obj = cand, new
        if obj < best_obj:
            best_q, best_obj = q, obj
        eta = min(eta * opts.step_growth, opts.max_step)
        calm = calm + 1 if change < opts.obj_tol else 0
        if calm >= opts.patience or obj <= opts.obj_tol:
            converged = True
    # P itself lies in the polytope; never report more than its objective
    if cond_mi_table(sub) < best_obj:
        best_q = sub
    q = best_q
    val = cond_mi_table(q)
    full = np.zeros_like(arr)
    full[live] = q
    full /= full.sum()
    diag = SolverDiag(it, val, _violation(q, p_yt, p_ys), converged, eta)
    if not converged:
        log.warning("BROJA solver hit max_iters=%d (objective %.3g)", opts.max_iters, val)
    return max(val, 0.0), Joint3(full), diag


def pid(p: Joint3, opts: SolverOptions | None = None) -> PidAtoms:
    """BROJA atoms (bits) from the unique-information minimizer."""
    uni_raw, _, diag = solve_unique(p, opts)
    return _atoms_from_unique(p, uni_raw, diag)


def _atoms_from_unique(p: Joint3, uni_t: float, diag=None) -> PidAtoms:
    mi_yt = mutual_info(p.p_yt())
    mi_ys = mutual_info(p.p_ys())
    mi_yts = mutual_info(p.merge_ts())
    red = mi_yt - uni_t
    uni_s = mi_ys - red
    syn = mi_yts - uni_t - uni_s - red
    raw = {"red": red, "uni_t": uni_t, "uni_s": uni_s, "syn": syn}
    for k, v in raw.items():
        if v < -1e-9:
            log.warning("atom %s = %.3g is negative beyond tolerance", k, v)
    c = {k: max(v, 0.0) for k, v in raw.items()}
    return PidAtoms(c["red"], c["uni_t"], c["uni_s"], c["syn"], mi_yt, mi_ys, mi_yts, diag, raw)


# --- exhaustive oracle ---------------------------------------------------

class UnsupportedSize(ValueError):
    pass


def oracle_free_dim(p: Joint3) -> int:
    return p.card_y * (p.card_t - 1) * (p.card_s - 1)


def oracle_unique(p: Joint3, grid_resolution: int = 21, refinement_rounds: int = 3,
                  max_dim: int = 6) -> float:
    """Grid search for min I_Q(Y:T|S) over the marginal polytope.

    Each y-slice of Q is Q0 plus a combination of double-difference
    matrices (+1 at (i,j), -1 at (i,last) and (last,j), +1 at (last,last)),
    which leave both marginals unchanged. Coefficient (i,j) is the only one
    touching cell (i,j), so its feasible range is boxed by that cell; the
    grid is the box, infeasible points are discarded, and the box is shrunk
    around the incumbent each round.
    """
    dim = oracle_free_dim(p)
    if dim > max_dim:
        raise UnsupportedSize(f"free dimension {dim} exceeds cap {max_dim}")
    q0 = _ci_coupling(p.p)
    if dim == 0:
        return max(cond_mi_table(q0), 0.0)
    ct, cs = p.card_t, p.card_s
    p_yt, p_ys = p.p_yt(), p.p_ys()
    basis, lo, hi = [], [], []
    for y in range(p.card_y):
        for i in range(ct - 1):
            for j in range(cs - 1):
                b = np.zeros_like(q0)
                b[y, i, j] += 1
                b[y, i, cs - 1] -= 1
                b[y, ct - 1, j] -= 1
                b[y, ct - 1, cs - 1] += 1
                basis.append(b)
                lo.append(-q0[y, i, j])
                hi.append(min(p_yt[y, i], p_ys[y, j]) - q0[y, i, j])
    basis = np.array(basis).reshape(dim, -1)
    lo, hi = np.array(lo), np.array(hi)
    center = np.zeros(dim)
    best = cond_mi_table(q0)
    n = grid_resolution
    for _ in range(refinement_rounds):
        axes = [np.linspace(a, b, n) if b > a else np.array([a]) for a, b in zip(lo, hi)]
        cand_best, cand_val = _grid_eval(q0, basis, axes)
        if cand_val <= best:
            best, center = cand_val, cand_best
        span = (hi - lo) / max(n - 1, 1) * 2
        lo2 = np.maximum(center - span, lo)
        hi2 = np.minimum(center + span, hi)
        lo, hi = lo2, hi2
    return max(best, 0.0)


def _grid_eval(q0, basis, axes, chunk=200_000):
    flat0 = q0.ravel()
    shape = q0.shape
    best_val, best_pt = np.inf, None
    total = int(np.prod([len(a) for a in axes]))
    grid_iter = itertools.product(*axes)
    done = 0
    while done < total:
        pts = np.array(list(itertools.islice(grid_iter, chunk)))
        done += len(pts)
        qs = flat0[None, :] + pts @ basis
        ok = np.all(qs >= -1e-15, axis=1)
        if not ok.any():
            continue
        qs = np.clip(qs[ok], 0, None).reshape(-1, *shape)
        vals = _batch_cmi(qs)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_pt = float(vals[k]), pts[ok][k]
    return best_pt, best_val


def _batch_cmi(qs):
    """I(Y:T|S) in bits for a stack of joints qs[n, y, t, s]."""
    def neg_h(a, axes):
        m = a.sum(axis=axes) if axes else a
        m = m.reshape(len(a), -1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(m > 1e-15, m * np.log2(m), 0.0).sum(axis=1)
    # I = H(YS) + H(TS) - H(YTS) - H(S)
    return -neg_h(qs, (2,)) - neg_h(qs, (1,)) + neg_h(qs, ()) + neg_h(qs, (1, 2))

