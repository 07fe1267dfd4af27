"""Minimal dense networks with hand-written reverse-mode gradients.

Everything is plain numpy so gradients can be audited against central finite
differences. Layers cache their last forward pass; backward() must follow a
forward() on the same batch and returns the gradient w.r.t. the layer input,
which is what lets a downstream network push gradient into an upstream one
during joint training.

Probabilities are clipped to [1e-7, 1 - 1e-7] inside the losses and the same
clipped value is used in the loss gradient, so analytic and numeric gradients
see one consistent function.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-7


def relu(z):
    return np.maximum(z, 0.0)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


ACTIVATIONS = {
    "relu": (relu, lambda z, a: (z > 0.0).astype(z.dtype)),
    "sigmoid": (sigmoid, lambda z, a: a * (1.0 - a)),
    "identity": (lambda z: z, lambda z, a: np.ones_like(z)),
}


class Dense:
    def __init__(self, w: np.ndarray, b: np.ndarray, activation: str):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.w = w
        self.b = b
        self.activation = activation
        self._x = self._z = self._a = None
        self.dw = np.zeros_like(w)
        self.db = np.zeros_like(b)

    @classmethod
    def init(cls, rng: np.random.Generator, fan_in: int, fan_out: int,
             activation: str) -> "Dense":
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, (fan_in, fan_out))
        return cls(w, np.zeros(fan_out), activation)

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        self._z = x @ self.w + self.b
        self._a = ACTIVATIONS[self.activation][0](self._z)
        return self._a

    def backward(self, da: np.ndarray) -> np.ndarray:
        dz = da * ACTIVATIONS[self.activation][1](self._z, self._a)
        self.dw = self._x.T @ dz
        self.db = dz.sum(axis=0)
        return dz @ self.w.T


class MLP:
    def __init__(self, layers: list[Dense]):
        self.layers = layers

    @classmethod
    def init(cls, rng: np.random.Generator, dims: list[int],
             activations: list[str]) -> "MLP":
        if len(activations) != len(dims) - 1:
            raise ValueError("need one activation per layer")
        layers = [Dense.init(rng, dims[i], dims[i + 1], activations[i])
                  for i in range(len(dims) - 1)]
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].w.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].w.shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.w, layer.b]
        return out

    def grads(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.dw, layer.db]
        return out

    def to_dict(self) -> dict:
        return {"layers": [{"w": l.w.tolist(), "b": l.b.tolist(),
                            "activation": l.activation} for l in self.layers]}

    @classmethod
    def from_dict(cls, doc: dict) -> "MLP":
        return cls([Dense(np.array(l["w"], dtype=np.float64),
                          np.array(l["b"], dtype=np.float64), l["activation"])
                    for l in doc["layers"]])


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def bce_loss(p: np.ndarray, y: np.ndarray):
    """Binary cross entropy, mean over rows and summed over columns.
    Returns (loss, dloss/dp)."""
    pc = np.clip(p, EPS, 1.0 - EPS)
    n = p.shape[0]
    loss = float((-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))).mean(axis=0).sum())
    grad = (pc - y) / (pc * (1.0 - pc)) / n
    return loss, grad


def mse_loss(p: np.ndarray, y: np.ndarray):
    """Squared error, mean over rows and summed over columns."""
    n = p.shape[0]
    d = p - y
    return float((d * d).mean(axis=0).sum()), 2.0 * d / n


def concept_loss(c_hat: np.ndarray, c: np.ndarray, binary_mask: np.ndarray):
    """Per-concept loss summed over concepts: BCE for binary columns, MSE
    for continuous ones. binary_mask is a bool vector over columns."""
    loss = 0.0
    grad = np.zeros_like(c_hat)
    if binary_mask.any():
        l, g = bce_loss(c_hat[:, binary_mask], c[:, binary_mask])
        loss += l
        grad[:, binary_mask] = g
    cont = ~binary_mask
    if cont.any():
        l, g = mse_loss(c_hat[:, cont], c[:, cont])
        loss += l
        grad[:, cont] = g
    return loss, grad


def numeric_gradient(loss_fn, params: list[np.ndarray],
                     h: float = 1e-5) -> list[np.ndarray]:
    """Central finite differences of loss_fn() w.r.t. live parameter arrays."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_fn()
            flat[i] = orig - h
            lm = loss_fn()
            flat[i] = orig
            gflat[i] = (lp - lm) / (2.0 * h)
        grads.append(g)
    return grads


def max_block_rel_error(analytic: list[np.ndarray],
                        numeric: list[np.ndarray]) -> float:
    """Worst per-parameter-block relative error ||ga - gn|| / max(||ga||, ||gn||)."""
    worst = 0.0
    for ga, gn in zip(analytic, numeric):
        denom = max(np.linalg.norm(ga), np.linalg.norm(gn), 1e-12)
        worst = max(worst, float(np.linalg.norm(ga - gn) / denom))
    return worst
