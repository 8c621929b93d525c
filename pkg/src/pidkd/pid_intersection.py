"""Intersection information: max I(Y:Q) over Q that adds nothing about Y
beyond either source, i.e. I(Y:Q|T) = I(Y:Q|S) = 0.

Two estimators:

* a deterministic witness: Q = g(T) = h(S) almost surely, which meets both
  constraints exactly and so certifies a lower bound;
* a penalized stochastic search over channels P(Q|Y), with Q independent of
  (T, S) given Y.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .info_core import Joint3, mutual_info
from .pid_broja import SolverOptions, UnsupportedSize, pid

LN2 = np.log(2.0)


@dataclass
class ChannelQ:
    kind: str  # "deterministic" | "stochastic"
    q_card: int
    achieved_value: float
    constraint_violation: float
    map_t: list | None = None
    map_s: list | None = None
    p_q_given_y: list | None = None
    feasible: bool = True

    def as_dict(self) -> dict:
        return asdict(self)


# --- deterministic common function ---------------------------------------

def _components(p_ts: np.ndarray):
    """Connected components of the bipartite support graph of P(t, s).

    Symbols with zero probability get component -1.
    """
    ct, cs = p_ts.shape
    parent = list(range(ct + cs))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for t, s in zip(*np.nonzero(p_ts > 0)):
        ra, rb = find(int(t)), find(ct + int(s))
        if ra != rb:
            parent[rb] = ra
    live = np.concatenate([p_ts.sum(axis=1) > 0, p_ts.sum(axis=0) > 0])
    roots = sorted({find(i) for i in range(ct + cs) if live[i]})
    index = {r: k for k, r in enumerate(roots)}
    comp = np.array([index[find(i)] if live[i] else -1 for i in range(ct + cs)])
    return comp[:ct], comp[ct:], len(roots)


def _set_partitions(n: int, max_blocks: int):
    """Restricted-growth strings of length n using at most max_blocks labels."""
    if n == 0:
        yield []
        return

    def rec(prefix, used):
        if len(prefix) == n:
            yield list(prefix)
            return
        for lab in range(min(used + 1, max_blocks)):
            prefix.append(lab)
            yield from rec(prefix, max(used, lab + 1))
            prefix.pop()

    yield from rec([0], 1)


def red_cap_deterministic(p: Joint3, max_q_card: int = 2, max_card: int = 6) -> ChannelQ:
    """Best Q = g(T) = h(S) (a.s.) with at most ``max_q_card`` symbols.

    Any agreeing pair is constant on the connected components of the
    support graph of P(t, s); so the search runs over groupings of the
    components, which covers every agreeing mapping pair up to relabeling.
    """
    if p.card_t > max_card or p.card_s > max_card:
        raise UnsupportedSize(f"cardinalities ({p.card_t}, {p.card_s}) exceed cap {max_card}")
    if max_q_card < 1:
        raise ValueError("max_q_card must be >= 1")
    comp_t, comp_s, n_comp = _components(p.p_ts())
    # joint of Y with component id
    p_y_comp = np.zeros((p.card_y, max(n_comp, 1)))
    for t in range(p.card_t):
        if comp_t[t] >= 0:
            p_y_comp[:, comp_t[t]] += p.p_yt()[:, t]
    best_val, best_lab = 0.0, [0] * n_comp
    for lab in _set_partitions(n_comp, max_q_card):
        k = max(lab) + 1 if lab else 1
        if k == 1:
            continue
        m = np.zeros((p.card_y, k))
        for c, q in enumerate(lab):
            m[:, q] += p_y_comp[:, c]
        val = mutual_info(m)
        if val > best_val + 1e-15:
            best_val, best_lab = val, lab
    q_card = max(best_lab) + 1 if best_lab else 1
    # zero-probability symbols are mapped to 0; they never occur
    map_t = [int(best_lab[c]) if c >= 0 else 0 for c in comp_t]
    map_s = [int(best_lab[c]) if c >= 0 else 0 for c in comp_s]
    return ChannelQ("deterministic", q_card, best_val, 0.0, map_t=map_t, map_s=map_s)


def disagreement(p: Joint3, map_t, map_s) -> float:
    """Pr[g(T) != h(S)] under p."""
    g = np.asarray(map_t)[:, None]
    h = np.asarray(map_s)[None, :]
    return float(p.p_ts()[g != h].sum())


# --- stochastic channel search --------------------------------------------

def _channel_terms(w, p_y, p_yt, p_ys):
    """I(Y:Q), I(Y:Q|T), I(Y:Q|S) in bits and their gradients w.r.t. w[y, q]."""

    def mi_and_grad(p_joint_y_x):
        # p_joint_y_x[y, x]; Q | Y ~ w, Q independent of X given Y.
        # I(Y:Q|X) = sum_{y,x,q} p(y,x) w(q|y) log w(q|y) / p(q|x)
        p_x = p_joint_y_x.sum(axis=0)
        p_y_given_x = np.divide(p_joint_y_x, p_x[None, :], out=np.zeros_like(p_joint_y_x), where=p_x > 0)
        p_q_given_x = p_y_given_x.T @ w  # [x, q]
        lw = np.log(np.maximum(w, 1e-300))
        lq = np.log(np.maximum(p_q_given_x, 1e-300))
        # ratio[y, x, q] = log w(q|y) - log p(q|x)
        ratio = lw[:, None, :] - lq[None, :, :]
        val = np.sum(p_joint_y_x[:, :, None] * w[:, None, :] * ratio)
        grad = np.einsum("yx,yxq->yq", p_joint_y_x, ratio)
        return val / LN2, grad / LN2

    i_yq, g_yq = mi_and_grad(p_y[:, None])
    i_t, g_t = mi_and_grad(p_yt)
    i_s, g_s = mi_and_grad(p_ys)
    return i_yq, i_t, i_s, g_yq, g_t, g_s


def project_simplex_rows(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    n, k = v.shape
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, k + 1)
    cond = u - css / idx > 0
    rho = k - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0)


def red_cap_stochastic(p: Joint3, q_card: int = 2, penalty_schedule=(1.0, 10.0, 100.0, 1000.0),
                       tol: float = 1e-3, steps_per_stage: int = 400, lr: float = 0.5,
                       restarts: int = 4, seed: int = 0) -> ChannelQ:
    """Penalized projected-gradient ascent on I(Y:Q) - lam * (I(Y:Q|T) + I(Y:Q|S)).

    The penalty weight follows ``penalty_schedule``. The best restart (by
    penalized objective at the final weight) is reported; it is flagged
    infeasible when its constraint violation exceeds ``tol`` bits.
    """
    if q_card < 1:
        raise ValueError("q_card must be >= 1")
    live = p.p_y() > 0
    p_y = p.p_y()[live]
    p_yt = p.p_yt()[live]
    p_ys = p.p_ys()[live]
    ny = int(live.sum())
    rng = np.random.default_rng(seed)
    lam_final = penalty_schedule[-1]
    best = None
    for r in range(restarts):
        w = rng.dirichlet(np.ones(q_card), size=ny) if q_card > 1 else np.ones((ny, 1))
        for lam in penalty_schedule:
            step = lr
            i_yq, i_t, i_s, g0, gt, gs = _channel_terms(w, p_y, p_yt, p_ys)
            obj = i_yq - lam * (i_t + i_s)
            for _ in range(steps_per_stage):
                grad = g0 - lam * (gt + gs)
                cand = project_simplex_rows(w + step / (1.0 + lam) * grad)
                c_yq, c_t, c_s, c0, ct_, cs_ = _channel_terms(cand, p_y, p_yt, p_ys)
                c_obj = c_yq - lam * (c_t + c_s)
                if c_obj >= obj - 1e-15:
                    done = c_obj - obj < 1e-13
                    w, obj = cand, c_obj
                    i_yq, i_t, i_s, g0, gt, gs = c_yq, c_t, c_s, c0, ct_, cs_
                    step = min(step * 1.2, 10.0)
                    if done:
                        break
                else:
                    step *= 0.5
                    if step < 1e-10:
                        break
        score = i_yq - lam_final * (i_t + i_s)
        if best is None or score > best[0]:
            best = (score, w.copy(), i_yq, i_t + i_s)
    _, w, value, viol = best
    full = np.full((p.card_y, q_card), 1.0 / q_card)
    full[live] = w
    value, viol = max(float(value), 0.0), max(float(viol), 0.0)
    return ChannelQ("stochastic", q_card, value, viol, p_q_given_y=full.tolist(),
                    feasible=bool(viol <= tol))


def verify_lower_bound(p: Joint3, q_card: int = 2, opts: SolverOptions | None = None,
                       method: str = "both", seed: int = 0) -> dict:
    """Compare the intersection-information estimate with BROJA redundancy.

    Infeasible stochastic runs do not enter the comparison.
    """
    atoms = pid(p, opts)
    cands = []
    if method in ("det", "both"):
        cands.append(red_cap_deterministic(p, max_q_card=max(q_card, 2)))
    if method in ("stoch", "both"):
        st = red_cap_stochastic(p, q_card=q_card, seed=seed)
        if st.feasible:
            cands.append(st)
    red_cap = max((c.achieved_value for c in cands), default=0.0)
    return {
        "red_cap": red_cap,
        "red_broja": atoms.red,
        "holds": bool(red_cap <= atoms.red + 1e-3),
        "gap": atoms.red - red_cap,
        "estimators": [c.kind for c in cands],
    }
