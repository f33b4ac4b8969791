"""Self-contained feed-forward network and training machinery.

A small MLP (two ReLU hidden layers of 24 units, softmax head) trained with
single-sample MSE steps under RMSprop or Adam, plus a FIFO replay memory
and a versioned binary weight-file format with a CRC trailer.
"""

from __future__ import annotations

import math
import struct
import zlib
from typing import Optional

import numpy as np

HIDDEN_UNITS = 24
RMS_DECAY = 0.9
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
EPSILON_HAT = 1e-7

MAGIC = b"DQAF"
FORMAT_VERSION = 1


class ShapeMismatch(ValueError):
    pass


class NonFiniteTarget(ValueError):
    pass


class InsufficientSamples(ValueError):
    pass


class CorruptFile(ValueError):
    pass


class MissingFile(FileNotFoundError):
    pass


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / e.sum()


class Mlp:
    """Dense(2F -> 24, ReLU) -> Dense(24 -> 24, ReLU) -> Dense(24 -> F, softmax)."""

    def __init__(self, input_dim: int, output_dim: int, hidden: int = HIDDEN_UNITS,
                 rng: Optional[np.random.Generator] = None):
        self.dims = [input_dim, hidden, hidden, output_dim]
        if rng is None:
            rng = np.random.default_rng(0)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ShapeMismatch(f"expected input of shape ({self.input_dim},), got {x.shape}")
        return x

    def forward(self, x) -> np.ndarray:
        x = self._check_input(x)
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(w @ h + b, 0.0)
        return _softmax(self.weights[-1] @ h + self.biases[-1])

    def gradients(self, x, action: int, target: float):
        """Loss (y[action] - target)^2 and its gradient w.r.t. every parameter.

        The gradient flows through the full softmax Jacobian: outputs other
        than ``action`` contribute through the softmax coupling.
        """
        x = self._check_input(x)
        zs = []
        hs = [x]
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = w @ h + b
            zs.append(z)
            h = np.maximum(z, 0.0)
            hs.append(h)
        logits = self.weights[-1] @ h + self.biases[-1]
        y = _softmax(logits)
        diff = y[action] - target
        loss = diff * diff

        # d loss / d logits through the softmax Jacobian row of `action`
        g = 2.0 * diff
        dz = g * y[action] * (-y)
        dz[action] += g * y[action]

        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.biases)
        grad_w[-1] = np.outer(dz, hs[-1])
        grad_b[-1] = dz
        upstream = self.weights[-1].T @ dz
        for i in range(len(self.weights) - 2, -1, -1):
            dz = upstream * (zs[i] > 0.0)
            grad_w[i] = np.outer(dz, hs[i])
            grad_b[i] = dz
            if i > 0:
                upstream = self.weights[i].T @ dz
        grads = []
        for gw, gb in zip(grad_w, grad_b):
            grads.extend([gw, gb])
        return loss, grads


class RmsProp:
    """acc <- 0.9 acc + 0.1 g^2 ; w <- w - lr * g / sqrt(acc + eps)."""

    name = "rmsprop"

    def __init__(self, params: list[np.ndarray], learning_rate: float,
                 decay: float = RMS_DECAY, epsilon: float = EPSILON_HAT):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        self.lr = learning_rate
        self.decay = decay
        self.epsilon = epsilon
        self.acc = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]):
        if len(params) != len(self.acc):
            raise ShapeMismatch("parameter count mismatch")
        for p, g, a in zip(params, grads, self.acc):
            if p.shape != g.shape:
                raise ShapeMismatch(f"grad shape {g.shape} != param shape {p.shape}")
            a *= self.decay
            a += (1.0 - self.decay) * g * g
            p -= self.lr * g / np.sqrt(a + self.epsilon)


class Adam:
    """Bias-corrected first/second moment update."""

    name = "adam"

    def __init__(self, params: list[np.ndarray], learning_rate: float,
                 beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
                 epsilon: float = EPSILON_HAT):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]):
        if len(params) != len(self.m):
            raise ShapeMismatch("parameter count mismatch")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape:
                raise ShapeMismatch(f"grad shape {g.shape} != param shape {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / c1
            v_hat = v / c2
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


def make_optimizer(kind: str, params: list[np.ndarray], learning_rate: float):
    if kind == "rmsprop":
        return RmsProp(params, learning_rate)
    if kind == "adam":
        return Adam(params, learning_rate)
    raise ValueError(f"unknown optimizer {kind!r}")


def train_step(net: Mlp, opt, x, action: int, target: float) -> float:
    """One MSE step on output ``action`` toward ``target``; returns the loss."""
    if not math.isfinite(target):
        raise NonFiniteTarget(f"target {target} is not finite")
    loss, grads = net.gradients(x, action, target)
    opt.step(net.params(), grads)
    return loss


class Experience:
    __slots__ = ("state", "action", "reward", "q_at_action")

    def __init__(self, state, action: int, reward: float, q_at_action: float):
        self.state = state
        self.action = action
        self.reward = reward
        self.q_at_action = q_at_action


class ReplayMemory:
    """FIFO ring buffer of experiences with uniform no-replacement sampling."""

    def __init__(self, capacity: int = 2000):
        self.capacity = capacity
        self._items: list[Experience] = []
        self._next = 0
        self.push_count = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, exp: Experience):
        if len(self._items) < self.capacity:
            self._items.append(exp)
        else:
            self._items[self._next] = exp
        self._next = (self._next + 1) % self.capacity
        self.push_count += 1

    def sample(self, count: int, rng) -> list[Experience]:
        if count > len(self._items):
            raise InsufficientSamples(f"need {count}, have {len(self._items)}")
        idx = rng.sample(range(len(self._items)), count)
        return [self._items[i] for i in idx]


def save_params(net: Mlp, path):
    """Versioned binary dump: magic, version, dims, float64 LE payload, CRC32."""
    parts = [MAGIC, struct.pack("<HH", FORMAT_VERSION, len(net.dims))]
    parts.append(struct.pack(f"<{len(net.dims)}I", *net.dims))
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    blob = b"".join(parts)
    blob += struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(blob)


def load_params(path) -> Mlp:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError as exc:
        raise MissingFile(str(path)) from exc
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CorruptFile(f"{path}: bad magic")
    payload, trailer = blob[:-4], blob[-4:]
    if struct.unpack("<I", trailer)[0] != (zlib.crc32(payload) & 0xFFFFFFFF):
        raise CorruptFile(f"{path}: checksum mismatch")
    version, n_dims = struct.unpack_from("<HH", blob, 4)
    if version != FORMAT_VERSION:
        raise CorruptFile(f"{path}: unsupported version {version}")
    dims = list(struct.unpack_from(f"<{n_dims}I", blob, 8))
    offset = 8 + 4 * n_dims
    expected = offset + sum(8 * (o * i + o) for i, o in zip(dims[:-1], dims[1:]))
    if len(payload) != expected:
        raise CorruptFile(f"{path}: truncated or oversized payload")
    net = Mlp.__new__(Mlp)
    net.dims = dims
    net.weights = []
    net.biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w_bytes = 8 * fan_out * fan_in
        w = np.frombuffer(payload, dtype="<f8", count=fan_out * fan_in, offset=offset)
        offset += w_bytes
        b = np.frombuffer(payload, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        net.weights.append(w.reshape(fan_out, fan_in).copy())
        net.biases.append(b.copy())
    if offset != len(payload):
        raise CorruptFile(f"{path}: trailing bytes")
    return net
