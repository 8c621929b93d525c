"""Property batches behind the `verify` command.

Each suite returns a JSON-ready dict; a failing property carries the first
counterexample it met. Failures are data here, never exceptions.
"""

from __future__ import annotations

import time

import numpy as np

from .datasets import make_example_triple, nuisance_joints
from .info_core import Joint3, cond_mutual_info, entropy, marginalize, mutual_info
from .pid_broja import pid
from .pid_intersection import verify_lower_bound

SUITES = ("thm1", "thm2", "thm3", "lemma1", "examples")
EX2_VALUE = 0.721928


class _Prop:
    """Accumulates one property's outcome over a batch."""

    def __init__(self, name, tol):
        self.name, self.tol = name, tol
        self.n = 0
        self.max_dev = 0.0
        self.counterexample = None

    def check(self, deviation, joint=None, **extra):
        """Record a case; ``deviation`` > tol is a failure."""
        self.n += 1
        deviation = float(deviation)
        self.max_dev = max(self.max_dev, deviation)
        if deviation > self.tol and self.counterexample is None:
            self.counterexample = {"deviation": deviation, **extra}
            if joint is not None:
                self.counterexample["joint"] = joint.to_json()

    def result(self):
        return {"name": self.name, "passed": self.counterexample is None, "n": self.n,
                "tolerance": self.tol, "max_deviation": self.max_dev,
                "counterexample": self.counterexample}


def random_joint(rng, cards) -> Joint3:
    return Joint3(rng.dirichlet(np.ones(int(np.prod(cards)))).reshape(cards))


def _rand_map(rng, n_in, n_out):
    return rng.integers(0, n_out, size=n_in)


def _apply_map_t(p: np.ndarray, h, n_out) -> np.ndarray:
    """Joint of (Y, h(T), S)."""
    out = np.zeros((p.shape[0], n_out, p.shape[2]))
    for t, q in enumerate(h):
        out[:, q, :] += p[:, t, :]
    return out


def suite_thm1(n=20, seed=0):
    """Nuisance teacher T=(Z,G): which student S maximizes I(T:S) and Red."""
    rng = np.random.default_rng(seed)
    mi_id = _Prop("I(T:S) equals the entropy of the chosen factor", 1e-9)
    argmax = _Prop("argmax_S I(T:S) is the factor with larger entropy", 0.0)
    red_max = _Prop("Red(S=Z) >= Red(S=G)", 1e-4)
    red_full = _Prop("Red(S=Z) equals I(Y:T)", 1e-4)
    for _ in range(n):
        zc, gc = rng.integers(2, 4, size=2)
        p_z, p_g = rng.dirichlet(np.ones(zc)), rng.dirichlet(np.ones(gc))
        _, jz, jg = nuisance_joints(p_z, p_g)
        i_z = mutual_info(marginalize(jz, "ts"))
        i_g = mutual_info(marginalize(jg, "ts"))
        h_z, h_g = entropy(p_z), entropy(p_g)
        mi_id.check(max(abs(i_z - h_z), abs(i_g - h_g)), jz)
        if abs(h_z - h_g) > 1e-9:
            winner_ok = (i_z > i_g) == (h_z > h_g)
            argmax.check(0.0 if winner_ok else 1.0, jz, h_z=h_z, h_g=h_g)
        a_z, a_g = pid(jz), pid(jg)
        red_max.check(a_g.red - a_z.red, jz, red_z=a_z.red, red_g=a_g.red)
        red_full.check(abs(a_z.red - a_z.mi_yt), jz)
    return [p.result() for p in (mi_id, argmax, red_max, red_full)]


def suite_thm2(n=100, seed=0):
    """Nonnegativity, student-dominance, monotonicity under processing of T."""
    rng = np.random.default_rng(seed)
    nonneg = _Prop("all atoms >= -1e-9 (raw)", 1e-9)
    uni_zero = _Prop("T = f(S) gives Uni(Y:T\\S) = 0", 1e-4)
    dominance = _Prop("T = f(S) gives max{I(Y:T), I(Y:S)} = I(Y:S)", 1e-6)
    mono = _Prop("Uni(Y:h(T)\\S) <= Uni(Y:T\\S)", 1e-4)
    for _ in range(n):
        cards = tuple(int(c) for c in rng.integers(2, 4, size=3))
        p = random_joint(rng, cards)
        atoms = pid(p)
        nonneg.check(max(0.0, -min(atoms.raw.values())), p)

        # T as a deterministic function of S
        ys = rng.dirichlet(np.ones(cards[0] * cards[2])).reshape(cards[0], cards[2])
        f = _rand_map(rng, cards[2], cards[1])
        arr = np.zeros(cards)
        for s in range(cards[2]):
            arr[:, f[s], s] += ys[:, s]
        q = Joint3(arr)
        a = pid(q)
        uni_zero.check(a.uni_t, q)
        dominance.check(abs(max(a.mi_yt, a.mi_ys) - a.mi_ys), q)

        # coarsen T by a random map
        n_out = int(rng.integers(1, cards[1] + 1))
        h = _rand_map(rng, cards[1], n_out)
        coarse = Joint3(_apply_map_t(p.p, h, n_out))
        mono.check(pid(coarse).uni_t - atoms.uni_t, p, map=h.tolist())
    return [x.result() for x in (nonneg, uni_zero, dominance, mono)]


def suite_thm3(n=100, seed=0):
    """Intersection information never exceeds BROJA redundancy."""
    rng = np.random.default_rng(seed)
    bound = _Prop("Red_cap <= Red + 1e-3", 1e-3)
    cap = _Prop("Red_cap <= min{I(Y:T), I(Y:S)} + 1e-3", 1e-3)
    for i in range(n):
        p = random_joint(rng, (2, 2, 2))
        rep = verify_lower_bound(p, seed=seed + i)
        bound.check(rep["red_cap"] - rep["red_broja"], p, **rep)
        m = min(mutual_info(p.p_yt()), mutual_info(p.p_ys()))
        cap.check(rep["red_cap"] - m, p)
    return [bound.result(), cap.result()]


def suite_lemma1(n=200, seed=0):
    """Conditioning on a function of S as well as S changes nothing."""
    rng = np.random.default_rng(seed)
    prop = _Prop("I(Y:T|g(S),S) = I(Y:T|S)", 1e-10)
    for _ in range(n):
        cards = tuple(int(c) for c in rng.integers(2, 5, size=3))
        p = random_joint(rng, cards)
        gc = int(rng.integers(1, 4))
        g = _rand_map(rng, cards[2], gc)
        # 4-variable joint p[y, t, g, s], with (g, s) merged into one axis
        four = np.zeros((cards[0], cards[1], gc, cards[2]))
        for s in range(cards[2]):
            four[:, :, g[s], s] = p.p[:, :, s]
        merged = four.reshape(cards[0], cards[1], gc * cards[2])
        prop.check(abs(cond_mutual_info(merged) - cond_mutual_info(p)), p, g=g.tolist())
    return [prop.result()]


def suite_examples(n=None, seed=None):
    """Atom values of the three worked examples."""
    e1, e2, e3 = (make_example_triple(k)[0] for k in (1, 2, 3))
    a1, a2, a3 = pid(e1), pid(e2), pid(e3)
    e2u2 = make_example_triple(2, s_choice="u2")[0]
    props = []

    def single(name, dev, tol, **extra):
        p = _Prop(name, tol)
        p.check(dev, **extra)
        props.append(p.result())

    single("ex1: uni_t = red = 0", max(a1.uni_t, a1.red), 1e-4)
    single("ex2 (S=U1): red = 0.721928", abs(a2.red - EX2_VALUE), 1e-4, red=a2.red)
    i_u1 = mutual_info(marginalize(e2, "ts"))
    i_u2 = mutual_info(marginalize(e2u2, "ts"))
    single("ex2: I(T:U1) = 0.721928", abs(i_u1 - EX2_VALUE), 1e-4, value=i_u1)
    single("ex2: I(T:U2) = 1", abs(i_u2 - 1.0), 1e-4, value=i_u2)
    single("ex2: I(T:U1) < I(T:U2)", 0.0 if i_u1 < i_u2 else 1.0, 0.0)
    single("ex3: uni_t = red = 0", max(a3.uni_t, a3.red), 1e-4)
    single("ex3: syn = 1", abs(a3.syn - 1.0), 1e-4, syn=a3.syn)
    return props


_RUNNERS = {"thm1": (suite_thm1, 20), "thm2": (suite_thm2, None), "thm3": (suite_thm3, None),
            "lemma1": (suite_lemma1, 200), "examples": (suite_examples, None)}


def run_suite(suite: str, n: int = 100, seed: int = 0) -> dict:
    """Run one suite (or "all"). ``n`` sizes the random batches of thm2/thm3;
    thm1 uses 20 constructions and lemma1 at least 200 joints."""
    if suite == "all":
        parts = [run_suite(s, n, seed) for s in SUITES]
        return {"suite": "all", "passed": all(p["passed"] for p in parts), "suites": parts,
                "elapsed_s": sum(p["elapsed_s"] for p in parts)}
    if suite not in _RUNNERS:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES + ('all',)}")
    fn, fixed = _RUNNERS[suite]
    if suite == "lemma1":
        size = max(n, fixed)
    else:
        size = fixed if fixed is not None else n
    t0 = time.time()
    props = fn(size, seed)
    return {"suite": suite, "passed": all(p["passed"] for p in props), "properties": props,
            "elapsed_s": time.time() - t0}
