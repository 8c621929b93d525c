"""Small closed-form and limiting cases across modules."""

import numpy as np
import pytest

from pidkd import Joint3, pid
from pidkd.datasets import make_blobs, make_example_triple, make_nuisance_task, nuisance_joints
from pidkd.distill import loss_rid_student, loss_rid_teacher, loss_ted_stage2, loss_vid, loss_vid_term
from pidkd.info_core import (cond_mutual_info, entropy, joint_from_samples, marginalize, mutual_info)
from pidkd.nn_toy import SGD, Dense, Network, cross_entropy, sgd_step
from pidkd.pid_broja import feasible_init, oracle_unique
from pidkd.pid_intersection import red_cap_deterministic, red_cap_stochastic, verify_lower_bound
from pidkd.rep_pipeline import RepDump, kmeans_assign, kmeans_fit, pca_fit, pca_transform, pipeline_pid
from conftest import and_gate

COPY = np.zeros((2, 2, 2))
COPY[0, 0, 0] = COPY[1, 1, 1] = 0.5
XOR = make_example_triple(3)[0]


# --- information quantities --------------------------------------------------

def test_entropy_and_mi_cases():
    assert entropy([1.0]) == 0.0
    assert mutual_info(np.diag([0.5, 0.5])) == pytest.approx(1.0)
    assert cond_mutual_info(XOR) == pytest.approx(1.0)
    assert cond_mutual_info(Joint3(np.full((2, 2, 2), 1 / 8))) == pytest.approx(0.0, abs=1e-12)
    assert cond_mutual_info(Joint3(COPY)) == pytest.approx(0.0, abs=1e-12)


def test_marginal_cases():
    assert np.allclose(marginalize(Joint3(np.full((2, 2, 2), 1 / 8)), "yt"), 0.25)
    yt = marginalize(make_example_triple(2)[0], "yt")
    # T = 2*U1 + U2 with U1 ~ Ber(0.2), U2 ~ Ber(0.5)
    assert np.allclose(yt, [[0.4, 0.4, 0, 0], [0, 0, 0.1, 0.1]])


def test_sample_cases(rng):
    j = joint_from_samples([[0, 0, 0], [0, 0, 1], [1, 0, 0], [1, 0, 1]], (2, 1, 2))
    assert np.allclose(j.p, 0.25)
    u = rng.integers(0, 2, size=(1000, 2))
    xor = joint_from_samples(np.stack([u[:, 0], u[:, 0] ^ u[:, 1], u[:, 1]], axis=1), (2, 2, 2))
    assert mutual_info(xor.p_yt()) < 0.05


# --- BROJA ----------------------------------------------------------------------

def test_initial_coupling():
    ci = np.einsum("y,yt,ys->yts", [0.3, 0.7], [[0.5, 0.5], [0.2, 0.8]], [[0.9, 0.1], [0.4, 0.6]])
    assert np.allclose(feasible_init(Joint3(ci)).p, ci)
    assert np.allclose(feasible_init(Joint3(COPY)).p, COPY)
    assert np.allclose(feasible_init(XOR).p, 1 / 8)


def test_named_triples():
    assert pid(make_example_triple(1)[0]).uni_t == pytest.approx(0.0, abs=1e-6)
    a = pid(and_gate())
    assert a.uni_t == pytest.approx(0.0, abs=1e-3)
    assert a.red == pytest.approx(mutual_info(and_gate().p_yt()), abs=1e-3)
    c = pid(Joint3(COPY))
    assert (c.red, c.uni_t, c.uni_s, c.syn) == pytest.approx((1, 0, 0, 0), abs=1e-6)
    e2 = make_example_triple(2)[0]
    assert pid(e2).red == pytest.approx(mutual_info(e2.p_yt()), abs=1e-6)
    for j in (Joint3(COPY), XOR):
        assert oracle_unique(j) == pytest.approx(0.0, abs=1e-9)
    assert oracle_unique(and_gate()) == pytest.approx(0.0, abs=1e-3)


# --- intersection information ---------------------------------------------------

def test_intersection_cases(rng):
    assert red_cap_deterministic(make_example_triple(1)[0]).achieved_value == 0.0
    _, jz, _ = nuisance_joints([0.5, 0.5], [0.5, 0.5])
    c = red_cap_deterministic(jz)
    assert c.achieved_value == pytest.approx(1.0)
    assert c.map_s in ([0, 1], [1, 0])
    assert c.map_t[0] == c.map_t[1] != c.map_t[2] == c.map_t[3]  # T -> Z
    s = red_cap_stochastic(XOR, seed=0)
    assert s.achieved_value <= 1e-3
    for _ in range(5):
        j = Joint3(rng.dirichlet(np.ones(8)).reshape(2, 2, 2))
        st = red_cap_stochastic(j, seed=1)
        if st.feasible:
            assert st.achieved_value >= red_cap_deterministic(j).achieved_value - 1e-3
    rep = verify_lower_bound(Joint3(COPY))
    assert rep["red_cap"] == pytest.approx(1.0, abs=1e-3) and abs(rep["gap"]) < 1e-3
    assert verify_lower_bound(and_gate())["red_cap"] <= 0.3113 + 1e-3


# --- networks ----------------------------------------------------------------

def test_identity_and_relu_nets(rng):
    x = rng.normal(size=(4, 3))
    ident = Network([Dense(np.eye(3), np.zeros(3), "identity")])
    assert np.array_equal(ident.forward(x)[0], x)
    relu = Network([Dense(np.eye(3), np.zeros(3), "relu")])
    assert not relu.forward(-np.abs(x) - 0.1)[0].any()


def test_hand_computed_two_layer():
    net = Network([Dense(np.array([[1.0, -1.0], [2.0, 0.5]]), np.array([0.0, 1.0]), "relu"),
                   Dense(np.array([[1.0], [2.0]]), np.array([0.5]), "identity")])
    # h = relu([1+4, -1+1+1]) = [5, 1]; out = 5 + 2 + 0.5
    assert net.forward(np.array([[1.0, 2.0]]))[0][0, 0] == pytest.approx(7.5)


def test_zero_upstream_gradient(rng):
    net = Network.mlp([3, 4, 2], rng)
    net.forward(rng.normal(size=(5, 3)))
    net.backward(np.zeros((5, 2)))
    assert not net.grad_flat().any()


def test_linear_squared_loss_gradient(rng):
    x, y = rng.normal(size=(6, 3)), rng.normal(size=(6, 2))
    w = rng.normal(size=(3, 2))
    net = Network([Dense(w.copy(), np.zeros(2), "identity")])
    out, _ = net.forward(x)
    net.backward(2 * (out - y) / len(x))
    assert np.allclose(net.layers[0].gw, 2 * x.T @ (x @ w - y) / len(x))


def test_sgd_trivial_cases(rng):
    net = Network.mlp([3, 2], rng)
    before = net.get_flat().copy()
    for g in net.grads():
        g[...] = 1.0
    sgd_step(net, lr=0.0)
    assert np.array_equal(net.get_flat(), before)
    for g in net.grads():
        g[...] = 1.0
    sgd_step(net, lr=0.1)
    assert np.allclose(net.get_flat(), before - 0.1)


def test_quadratic_bowl_converges():
    w = np.array([[3.0, -2.0]])
    net = Network([Dense(w, np.zeros(2), "identity")])
    opt = SGD([net], lr=0.1, momentum=0.0, weight_decay=0.0, nesterov=False)
    losses = []
    for _ in range(100):
        layer = net.layers[0]
        losses.append(float((layer.w ** 2).sum() + (layer.b ** 2).sum()))
        layer.gw[...] = 2 * layer.w
        layer.gb[...] = 2 * layer.b
        opt.step()
    assert all(b < a for a, b in zip(losses, losses[1:]))
    assert losses[-1] < 1e-6


def test_cross_entropy_cases():
    assert cross_entropy(np.zeros((1, 5)), np.array([2]))[0] == pytest.approx(np.log(5))
    assert cross_entropy(np.array([[50.0, -50.0]]), np.array([0]))[0] < 1e-12
    # one sample, logits (1, 0), label 1: ln(1 + e)
    assert cross_entropy(np.array([[1.0, 0.0]]), np.array([1]))[0] == pytest.approx(np.log(1 + np.e))


# --- distillation losses ---------------------------------------------------------

def test_rid_loss_cases():
    f = np.array([[1.0, 2.0]])
    logits, y = np.array([[0.3, -0.2]]), np.array([0])
    loss, _, d_ft = loss_rid_teacher(f, logits, f.copy(), np.ones(2), y)
    assert loss == pytest.approx(cross_entropy(logits, y)[0]) and not d_ft.any()
    big, _, _ = loss_rid_teacher(f, logits, np.zeros_like(f), np.full(2, 1e12), y)
    assert big == pytest.approx(cross_entropy(logits, y)[0], abs=1e-9)
    # ft - fs = (1, 2), sigma = (2, 4): 1/2 + 4/4
    assert loss_rid_teacher(f, logits, np.zeros_like(f), np.array([2.0, 4.0]), y)[0] == pytest.approx(
        cross_entropy(logits, y)[0] + 1.5)
    sig = np.array([0.5, 2.0])
    val, d_fs, d_sigma = loss_rid_student(f, f.copy(), sig)
    assert val == pytest.approx(4.25) and np.all(d_sigma > 0) and not d_fs.any()
    # ||sigma||^2 + (1/0.5 + 4/2) = 4.25 + 4
    assert loss_rid_student(f, np.zeros_like(f), sig)[0] == pytest.approx(8.25)


def test_vid_loss_cases(rng):
    t = rng.normal(size=(10, 3))
    sig = np.array([0.5, 1.0, 2.0])
    assert loss_vid_term(t, t.copy(), sig)[0] == pytest.approx(np.log(sig).sum())
    logits, y = rng.normal(size=(10, 4)), rng.integers(0, 4, 10)
    total = loss_vid([t], [np.zeros_like(t)], [np.ones(3)], y, logits, 0.7)[0]
    assert total - cross_entropy(logits, y)[0] == pytest.approx(0.7 * (t ** 2).mean(axis=0).sum() / 2)


def test_ted_equal_outputs():
    a = np.arange(6.0).reshape(2, 3)
    assert loss_ted_stage2(a, a.copy())[0] == 0.0


# --- PCA / k-means / pipeline ---------------------------------------------------

def test_pca_axis_aligned(rng):
    x = rng.normal(size=(500, 3)) * [1.0, 5.0, 2.0]
    m = pca_fit(x, 3)
    assert np.allclose(np.abs(m.components), np.eye(3)[[1, 2, 0]], atol=0.1)
    back = pca_transform(m, x) @ m.components
    assert np.allclose(back, x - x.mean(axis=0))


def test_pca_rank_one_and_reconstruction(rng):
    x = np.outer(rng.normal(size=200), [1.0, 2.0, -1.0])
    m = pca_fit(x, 3)
    total = x.var(axis=0, ddof=1).sum()
    assert m.explained_variance[0] == pytest.approx(total)
    assert np.allclose(m.explained_variance[1:], 0.0, atol=1e-10)
    y = rng.normal(size=(300, 5)) @ rng.normal(size=(5, 5))
    full = pca_fit(y, 5)
    part = pca_fit(y, 2)
    resid = (y - y.mean(axis=0)) - pca_transform(part, y) @ part.components
    assert (resid ** 2).sum() / (len(y) - 1) == pytest.approx(full.explained_variance[2:].sum(), rel=1e-8)


def test_pca_zero_variance_order():
    x = np.zeros((10, 3))
    x[:, 1] = np.arange(10)
    m = pca_fit(x, 3)
    assert np.allclose(np.abs(m.components[0]), [0, 1, 0])
    # remaining zero-variance directions keep index order
    assert np.argmax(np.abs(m.components[1])) < np.argmax(np.abs(m.components[2]))


def test_kmeans_cases(rng):
    centers = np.array([[0, 0], [20, 0], [0, 20], [20, 20]], float)
    lab = np.repeat(np.arange(4), 50)
    x = centers[lab] + rng.normal(size=(200, 2))
    got = kmeans_assign(kmeans_fit(x, 4), x)
    # a bijection between found and true clusters
    assert len({(a, b) for a, b in zip(lab, got)}) == 4
    assert np.allclose(kmeans_fit(x, 1).centroids[0], x.mean(axis=0))
    dup = np.concatenate([x, x])
    a = kmeans_assign(kmeans_fit(dup, 4), dup)
    assert np.array_equal(a[:200], a[200:])


def test_pipeline_noise_teacher_and_permuted_labels(rng):
    n = 2000
    y = rng.integers(0, 4, n)
    trained_s = np.eye(4)[y] + 0.05 * rng.normal(size=(n, 4))
    a = pipeline_pid(RepDump(rng.normal(size=(n, 4)), trained_s, y), n_components=4, k=4).atoms
    assert a.uni_t <= 0.05 and a.red <= 0.05
    b = pipeline_pid(RepDump(trained_s, trained_s.copy(), rng.permutation(y)), n_components=4, k=4).atoms
    assert max(b.red, b.uni_t, b.uni_s, b.syn) <= 0.05


# --- datasets ----------------------------------------------------------------------

def test_example_information_values():
    assert mutual_info(make_example_triple(1)[0].p_yt()) == pytest.approx(0.0, abs=1e-12)
    e3 = make_example_triple(3)[0]
    assert mutual_info(e3.merge_ts()) == pytest.approx(1.0)
    assert mutual_info(e3.p_yt()) == pytest.approx(0.0, abs=1e-12)
    assert mutual_info(e3.p_ys()) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("hz,hg,winner", [(1, 2, "g"), (2, 1, "z")])
def test_nuisance_argmax(hz, hg, winner):
    task = make_nuisance_task(h_z_bits=hz, h_g_bits=hg, n_samples=200)
    i_z = mutual_info(marginalize(task.joint_s_is_z, "ts"))
    i_g = mutual_info(marginalize(task.joint_s_is_g, "ts"))
    assert ("g" if i_g > i_z else "z") == winner
    assert pid(task.joint_s_is_z).red == pytest.approx(mutual_info(task.joint_s_is_z.p_yt()), abs=1e-3)


def test_separable_blobs_linear():
    d = make_blobs(spread=1e-3, nuisance_dims=0, n_train=300, n_test=200)
    xa = np.c_[d.x_train, np.ones(len(d.x_train))]
    w, *_ = np.linalg.lstsq(xa, np.eye(d.n_classes)[d.y_train], rcond=None)
    pred = np.argmax(np.c_[d.x_test, np.ones(len(d.x_test))] @ w, axis=1)
    assert np.mean(pred == d.y_test) == 1.0
