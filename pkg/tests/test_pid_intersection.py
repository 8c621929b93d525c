import numpy as np
import pytest
from hypothesis import given, settings

from pidkd import Joint3, pid
from pidkd.datasets import make_example_triple
from pidkd.pid_broja import UnsupportedSize
from pidkd.pid_intersection import (disagreement, project_simplex_rows, red_cap_deterministic,
                                    red_cap_stochastic, verify_lower_bound)
from conftest import and_gate, joints


def test_copy_triple_det_reaches_full_information():
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[1, 1, 1] = 0.5
    c = red_cap_deterministic(Joint3(p))
    assert c.achieved_value == pytest.approx(1.0)
    assert disagreement(Joint3(p), c.map_t, c.map_s) == 0.0


def test_example2_common_part():
    # T=(U1,U2), S=U1: the common function is U1 itself
    j = make_example_triple(2)[0]
    c = red_cap_deterministic(j, max_q_card=2)
    assert c.achieved_value == pytest.approx(0.721928, abs=1e-5)


def test_xor_and_and_have_no_common_function():
    for j in (make_example_triple(3)[0], and_gate()):
        assert red_cap_deterministic(j).achieved_value == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=20)
@given(joints(max_card=2))
def test_lower_bound_holds(j):
    rep = verify_lower_bound(j)
    assert rep["holds"], rep


@settings(max_examples=20)
@given(joints(max_card=3))
def test_det_agreement_is_exact(j):
    c = red_cap_deterministic(j, max_q_card=3)
    assert disagreement(j, c.map_t, c.map_s) == 0.0
    assert c.achieved_value <= pid(j).red + 1e-4


def test_stochastic_on_copy_triple():
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[1, 1, 1] = 0.5
    c = red_cap_stochastic(Joint3(p), q_card=2, seed=1)
    assert c.feasible
    assert c.achieved_value == pytest.approx(1.0, abs=1e-3)


def test_simplex_projection(rng):
    v = rng.normal(size=(20, 4)) * 3
    w = project_simplex_rows(v)
    assert np.all(w >= 0)
    assert np.allclose(w.sum(axis=1), 1.0)
    # already on the simplex: unchanged
    x = rng.dirichlet(np.ones(4), size=5)
    assert np.allclose(project_simplex_rows(x), x)


def test_size_cap():
    with pytest.raises(UnsupportedSize):
        red_cap_deterministic(Joint3(np.ones((2, 7, 2)) / 28))
