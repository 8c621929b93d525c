import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pidkd import Joint3, SolverOptions, pid, solve_unique
from pidkd.datasets import make_example_triple
from pidkd.info_core import cond_mutual_info, mutual_info
from pidkd.pid_broja import UnsupportedSize, oracle_unique
from conftest import and_gate, joints

# Values frozen from an independent Nelder-Mead minimization over the
# marginal-preserving coordinates (scipy, run once offline).
FROZEN = [
    ([[[0.027722, 0.356288], [0.041334, 0.040327], [0.01233, 0.101212]],
      [[0.014712, 0.082426], [0.02267, 0.180122], [0.04083, 0.080026]]], 0.1497194683),
    ([[[0.005514, 0.006486], [0.011001, 0.375933], [0.13452, 0.185545]],
      [[0.014423, 0.023981], [0.07159, 0.010851], [0.00132, 0.158836]]], 0.0532774802),
]


def _normed(a):
    a = np.array(a)
    return Joint3(a / a.sum())


@pytest.mark.parametrize("arr,uni", FROZEN)
def test_frozen_unique_values(arr, uni):
    assert pid(_normed(arr)).uni_t == pytest.approx(uni, abs=1e-6)


def test_and_gate():
    a = pid(and_gate())
    assert a.red == pytest.approx(0.311278, abs=1e-5)
    assert a.syn == pytest.approx(0.5, abs=1e-5)
    assert a.uni_t == pytest.approx(0.0, abs=1e-5)
    assert a.uni_s == pytest.approx(0.0, abs=1e-5)


def test_xor_is_pure_synergy():
    a = pid(make_example_triple(3)[0])
    assert a.syn == pytest.approx(1.0, abs=1e-6)
    assert max(a.red, a.uni_t, a.uni_s) < 1e-6


def test_two_independent_copies():
    # Y=(A,B), T=A, S=B: each source holds one unique bit
    p = np.zeros((4, 2, 2))
    for a in (0, 1):
        for b in (0, 1):
            p[2 * a + b, a, b] = 0.25
    r = pid(Joint3(p))
    assert r.uni_t == pytest.approx(1.0, abs=1e-5)
    assert r.uni_s == pytest.approx(1.0, abs=1e-5)
    assert r.red == pytest.approx(0.0, abs=1e-5)
    assert r.syn == pytest.approx(0.0, abs=1e-5)


@settings(max_examples=25)
@given(joints())
def test_atoms_sum_and_consistency(j):
    a = pid(j)
    assert min(a.raw.values()) > -1e-6
    assert a.red + a.uni_t + a.uni_s + a.syn == pytest.approx(a.mi_yts, abs=1e-6)
    assert a.red + a.uni_t == pytest.approx(a.mi_yt, abs=1e-6)
    assert a.red + a.uni_s == pytest.approx(a.mi_ys, abs=1e-6)
    assert a.uni_t <= cond_mutual_info(j) + 1e-9


@settings(max_examples=25)
@given(joints())
def test_solution_in_polytope(j):
    val, q, diag = solve_unique(j)
    assert np.allclose(q.p_yt(), j.p_yt(), atol=1e-8)
    assert np.allclose(q.p_ys(), j.p_ys(), atol=1e-8)
    assert val == pytest.approx(cond_mutual_info(q), abs=1e-9)


@settings(max_examples=20)
@given(joints())
def test_source_swap_symmetry(j):
    a, b = pid(j), pid(j.swap_sources())
    assert a.red == pytest.approx(b.red, abs=2e-4)
    assert a.uni_t == pytest.approx(b.uni_s, abs=2e-4)


@settings(max_examples=15)
@given(joints(max_card=2))
def test_solver_matches_grid_oracle(j):
    assert solve_unique(j)[0] == pytest.approx(oracle_unique(j), abs=1e-3)


def test_oracle_refuses_large():
    j = Joint3(np.ones((3, 4, 4)) / 48)
    with pytest.raises(UnsupportedSize):
        oracle_unique(j)


def test_solver_options_validated():
    with pytest.raises(ValueError):
        SolverOptions(step_size=0)
    with pytest.raises(ValueError):
        SolverOptions(step_growth=0.5)


def test_degenerate_y():
    # constant Y: every atom is zero
    p = np.zeros((1, 2, 2))
    p[0] = [[0.1, 0.4], [0.3, 0.2]]
    a = pid(Joint3(p))
    assert max(a.red, a.uni_t, a.uni_s, a.syn) == 0.0


def test_unused_y_symbol():
    p = np.zeros((3, 2, 2))
    p[0, 0, 0] = p[1, 1, 1] = 0.5
    a = pid(Joint3(p))
    assert a.red == pytest.approx(1.0, abs=1e-6)
    assert mutual_info(Joint3(p).p_yt()) == pytest.approx(1.0)
