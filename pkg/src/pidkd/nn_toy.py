"""Small dense networks with hand-written backprop.

Representations are flat feature vectors (one channel per unit). A network
exposes *taps*: post-activation outputs of chosen layers, which distillation
losses attach to; gradients can be injected at those taps during backward.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "identity")


@dataclass
class Dense:
    w: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)
    activation: str = "relu"
    gw: np.ndarray = field(init=False, repr=False)
    gb: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[1],):
            raise ValueError("inconsistent dense layer shapes")
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)


class Network:
    """Feedforward stack of dense layers.

    ``taps`` are layer indices whose post-activation outputs are returned by
    :meth:`forward` (in the listed order).
    """

    def __init__(self, layers: list[Dense], taps=(), name: str = "net"):
        for a, b in zip(layers, layers[1:]):
            if a.w.shape[1] != b.w.shape[0]:
                raise ValueError("layer shape chain is inconsistent")
        if any(not 0 <= t < len(layers) for t in taps):
            raise ValueError("tap index out of range")
        self.layers = layers
        self.taps = list(taps)
        self.name = name
        self._cache = None

    @classmethod
    def mlp(cls, sizes, rng, hidden_act="relu", out_act="identity", taps=(), name="net"):
        """Glorot-uniform MLP with layer widths ``sizes`` (input first)."""
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            a = np.sqrt(6.0 / (fan_in + fan_out))
            act = out_act if i == len(sizes) - 2 else hidden_act
            layers.append(Dense(rng.uniform(-a, a, (fan_in, fan_out)), np.zeros(fan_out), act))
        return cls(layers, taps, name)

    @property
    def in_dim(self) -> int:
        return self.layers[0].w.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].w.shape[1]

    def tap_dims(self) -> list[int]:
        return [self.layers[t].w.shape[1] for t in self.taps]

    # --- forward / backward ---------------------------------------------
    def forward(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"{self.name}: expected (batch, {self.in_dim}) input, got {x.shape}")
        inputs, pre, outs = [], [], []
        h = x
        for layer in self.layers:
            inputs.append(h)
            z = h @ layer.w + layer.b
            pre.append(z)
            h = np.maximum(z, 0.0) if layer.activation == "relu" else z
            outs.append(h)
        self._cache = (inputs, pre)
        return h, [outs[t] for t in self.taps]

    def backward(self, grad_out, tap_grads=None, accumulate: bool = True):
        """Backprop ``grad_out`` (d loss / d output) plus optional tap gradients.

        ``tap_grads`` is a list aligned with ``self.taps`` (entries may be
        None). Parameter gradients accumulate into the layer buffers; the
        gradient w.r.t. the network input is returned.
        """
        if self._cache is None:
            raise RuntimeError(f"{self.name}: backward called without a cached forward")
        inputs, pre = self._cache
        extra = {}
        if tap_grads is not None:
            for t, g in zip(self.taps, tap_grads):
                if g is not None:
                    extra[t] = extra.get(t, 0) + g
        g = np.zeros_like(pre[-1]) if grad_out is None else np.asarray(grad_out, dtype=float)
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if i in extra:
                g = g + extra[i]
            if layer.activation == "relu":
                g = g * (pre[i] > 0)
            if accumulate:
                layer.gw += inputs[i].T @ g
                layer.gb += g.sum(axis=0)
            g = g @ layer.w.T
        return g

    def zero_grad(self):
        for layer in self.layers:
            layer.gw[...] = 0.0
            layer.gb[...] = 0.0

    # --- parameter views ------------------------------------------------
    def params(self) -> list[np.ndarray]:
        return [a for l in self.layers for a in (l.w, l.b)]

    def grads(self) -> list[np.ndarray]:
        return [a for l in self.layers for a in (l.gw, l.gb)]

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, flat: np.ndarray):
        i = 0
        for p in self.params():
            p[...] = flat[i:i + p.size].reshape(p.shape)
            i += p.size
        if i != len(flat):
            raise ValueError("flat parameter vector has the wrong length")

    def grad_flat(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.grads()])

    def copy(self, name=None) -> "Network":
        layers = [Dense(l.w.copy(), l.b.copy(), l.activation) for l in self.layers]
        return Network(layers, list(self.taps), name or self.name)

    # --- checkpoint format ----------------------------------------------
    def to_json(self) -> dict:
        return {
            "name": self.name,
            "shapes": [list(l.w.shape) for l in self.layers],
            "activations": [l.activation for l in self.layers],
            "taps": self.taps,
            "params": self.get_flat().tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Network":
        layers = [Dense(np.zeros(s), np.zeros(s[1]), a) for s, a in zip(obj["shapes"], obj["activations"])]
        net = cls(layers, obj.get("taps", []), obj.get("name", "net"))
        net.set_flat(np.asarray(obj["params"], dtype=float))
        return net

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "Network":
        return cls.from_json(json.loads(Path(path).read_text()))


class SigmaVec:
    """Positive per-channel weights stored as logs: sigma = exp(raw)."""

    def __init__(self, n_channels: int, init: float = 1.0, floor: float = 0.0):
        self.raw = np.full(n_channels, np.log(init))
        self.grad = np.zeros(n_channels)
        self.floor = floor

    @property
    def value(self) -> np.ndarray:
        s = np.exp(self.raw)
        return np.maximum(s, self.floor) if self.floor > 0 else s

    def dvalue_draw(self) -> np.ndarray:
        """d sigma / d raw (zero where the floor is active)."""
        s = np.exp(self.raw)
        if self.floor > 0:
            return np.where(s > self.floor, s, 0.0)
        return s

    def params(self):
        return [self.raw]

    def grads(self):
        return [self.grad]

    def zero_grad(self):
        self.grad[...] = 0.0


class SGD:
    """SGD with (Nesterov) momentum and L2 weight decay, PyTorch semantics.

    Works on anything exposing ``params()`` / ``grads()`` / ``zero_grad()``.
    ``clip_norm`` rescales the joint gradient of all modules to at most that
    L2 norm before the update (None disables it).
    """

    def __init__(self, modules, lr=0.05, momentum=0.9, weight_decay=5e-4, nesterov=True,
                 clip_norm=None):
        self.modules = list(modules)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.nesterov = nesterov
        self.clip_norm = clip_norm
        self.velocity = [np.zeros_like(p) for m in self.modules for p in m.params()]

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for m in self.modules for g in m.grads())))

    def step(self):
        scale = 1.0
        if self.clip_norm is not None:
            norm = self.grad_norm()
            if norm > self.clip_norm:
                scale = self.clip_norm / norm
        i = 0
        for m in self.modules:
            for p, g in zip(m.params(), m.grads()):
                if scale != 1.0:
                    g = g * scale
                sgd_update(p, g, self.velocity[i], self.lr, self.momentum, self.weight_decay, self.nesterov)
                i += 1
            m.zero_grad()


def sgd_update(p, g, v, lr, momentum, weight_decay, nesterov):
    """In-place update of parameter ``p`` and velocity ``v``."""
    d = g + weight_decay * p if weight_decay else g.copy()
    if momentum:
        v *= momentum
        v += d
        d = d + momentum * v if nesterov else v
    p -= lr * d


def sgd_step(net, lr, momentum=0.0, weight_decay=0.0, nesterov=False, velocity=None):
    """One step on a single module; returns the (advanced) velocity buffers."""
    if velocity is None:
        velocity = [np.zeros_like(p) for p in net.params()]
    for p, g, v in zip(net.params(), net.grads(), velocity):
        sgd_update(p, g, v, lr, momentum, weight_decay, nesterov)
    net.zero_grad()
    return velocity


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, labels):
    """Mean negative log-likelihood (nats) and its gradient w.r.t. logits."""
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,) or np.any(labels < 0) or np.any(labels >= k):
        raise ValueError("label out of range")
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(n), labels]))
    grad = softmax(logits)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def accuracy(logits, labels) -> float:
    return float(np.mean(np.argmax(logits, axis=1) == labels))
