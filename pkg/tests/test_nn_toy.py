import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pidkd.nn_toy import SGD, Network, SigmaVec, accuracy, cross_entropy, sgd_update, softmax
from gradcheck import check


def _net(rng, sizes=(4, 6, 5, 3), taps=(0, 1)):
    net = Network.mlp(list(sizes), rng, taps=taps)
    for layer in net.layers:  # keep pre-activations off the ReLU kink
        layer.b[:] = rng.normal(scale=0.1, size=layer.b.shape)
    return net


@settings(max_examples=10)
@given(st.integers(0, 2**31))
def test_ce_backward_matches_fd(seed):
    rng = np.random.default_rng(seed)
    net = _net(rng)
    x, y = rng.normal(size=(7, 4)), rng.integers(0, 3, 7)

    def fn():
        logits, _ = net.forward(x)
        loss, d = cross_entropy(logits, y)
        net.backward(d)
        return loss

    assert check([net], fn) <= 1e-4


def test_tap_gradient_injection(rng):
    net = _net(rng)
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=(5, 6))

    def fn():
        _, taps = net.forward(x)
        net.backward(None, [w, None])
        return float((taps[0] * w).sum())

    assert check([net], fn) <= 1e-4


def test_cross_entropy_values():
    loss, g = cross_entropy(np.zeros((2, 4)), np.array([0, 3]))
    assert loss == pytest.approx(np.log(4))
    assert np.allclose(g.sum(axis=1), 0.0)
    with pytest.raises(ValueError):
        cross_entropy(np.zeros((2, 4)), np.array([0, 4]))
    assert np.allclose(softmax(np.array([[1000.0, 1000.0]])), 0.5)
    assert accuracy(np.eye(3), np.array([0, 1, 1])) == pytest.approx(2 / 3)


def test_sgd_nesterov_formula():
    p, v = np.array([1.0]), np.zeros(1)
    g = np.array([0.5])
    sgd_update(p, g, v, lr=0.1, momentum=0.9, weight_decay=0.01, nesterov=True)
    d = 0.5 + 0.01
    assert v[0] == pytest.approx(d)
    assert p[0] == pytest.approx(1.0 - 0.1 * (d + 0.9 * d))


def test_sgd_clip(rng):
    net = _net(rng)
    for g in net.grads():
        g[...] = 100.0
    before = net.get_flat()
    opt = SGD([net], lr=1.0, momentum=0.0, weight_decay=0.0, nesterov=False, clip_norm=1.0)
    opt.step()
    assert np.linalg.norm(net.get_flat() - before) == pytest.approx(1.0)
    assert opt.grad_norm() == 0.0  # buffers cleared


def test_json_roundtrip(tmp_path, rng):
    net = _net(rng)
    net.save(tmp_path / "n.json")
    back = Network.load(tmp_path / "n.json")
    x = rng.normal(size=(3, 4))
    assert np.array_equal(back.forward(x)[0], net.forward(x)[0])
    assert back.taps == net.taps


def test_shape_errors(rng):
    net = _net(rng)
    with pytest.raises(ValueError):
        net.forward(np.zeros((2, 5)))
    with pytest.raises(RuntimeError):
        _net(rng).backward(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        net.set_flat(np.zeros(3))


def test_sigma_floor():
    s = SigmaVec(3, init=1.0, floor=0.5)
    s.raw[:] = np.log([2.0, 0.1, 1.0])
    assert np.allclose(s.value, [2.0, 0.5, 1.0])
    assert s.dvalue_draw()[1] == 0.0
