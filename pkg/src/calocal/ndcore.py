"""Small numeric kernel: a dense leaky-ReLU MLP with hand-written
backpropagation, an RMSProp update and critic weight clipping.

Everything runs in float64. Arrays are plain numpy; a batch of inputs is a
2-D array of shape ``(n_samples, n_features)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError

DEFAULT_ALPHA = 0.2


@dataclass
class MlpParams:
    """Dense layers ``(W, b)`` with ``W`` of shape ``(out, in)``."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if len(self.weights) == 0 or len(self.weights) != len(self.biases):
            raise ShapeError("need one bias per weight matrix and at least one layer")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64).reshape(-1) for b in self.biases]
        prev = None
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError(f"layer {k}: weight {w.shape} and bias {b.shape} disagree")
            if prev is not None and w.shape[1] != prev:
                raise ShapeError(f"layer {k} expects {w.shape[1]} inputs, previous layer gives {prev}")
            prev = w.shape[0]
        if prev != 1:
            raise ShapeError(f"final layer must have one output, got {prev}")

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    def arrays(self) -> list[np.ndarray]:
        """Flat parameter list, ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_arrays(self, arrays) -> MlpParams:
        return MlpParams(list(arrays[0::2]), list(arrays[1::2]), self.alpha)

    def copy(self) -> MlpParams:
        return self.with_arrays([a.copy() for a in self.arrays()])


def init_mlp(n_inputs: int, hidden, rng: np.random.Generator, scale=0.01,
             alpha=DEFAULT_ALPHA) -> MlpParams:
    """Uniform init in ``[-scale, scale]`` for every weight and bias."""
    dims = [n_inputs, *hidden, 1]
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.uniform(-scale, scale, size=(d_out, d_in)))
        biases.append(rng.uniform(-scale, scale, size=d_out))
    return MlpParams(weights, biases, alpha)


@dataclass
class MlpCache:
    inputs: list[np.ndarray]
    preacts: list[np.ndarray]
    squeeze: bool


def _leaky(z, alpha):
    return np.where(z > 0, z, alpha * z)


def mlp_forward(x, p: MlpParams):
    """Score one input vector or a batch of them.

    Returns ``(score, cache)``; ``score`` is a float for a 1-D input and a
    1-D array for a batch. The last layer is affine with no nonlinearity.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.ndim != 2 or h.shape[1] != p.n_inputs:
        raise ShapeError(f"input has shape {x.shape}, critic expects {p.n_inputs} features")
    if not np.all(np.isfinite(h)):
        raise NumericError("non-finite critic input")
    inputs, preacts = [], []
    last = len(p.weights) - 1
    for k, (w, b) in enumerate(zip(p.weights, p.biases)):
        inputs.append(h)
        z = h @ w.T + b
        preacts.append(z)
        h = z if k == last else _leaky(z, p.alpha)
    score = h[:, 0]
    cache = MlpCache(inputs, preacts, squeeze)
    return (float(score[0]) if squeeze else score), cache


def mlp_backward(cache: MlpCache, p: MlpParams, upstream=1.0):
    """Backpropagate ``upstream * d(score)/d(.)`` through the network.

    ``upstream`` is a scalar or one weight per batch row. Parameter
    gradients are summed over the batch; the input gradient keeps the
    batch shape of the forward call.
    """
    n_layers = len(p.weights)
    if len(cache.inputs) != n_layers:
        raise ShapeError("cache was produced by a network with a different depth")
    for k, (w, h) in enumerate(zip(p.weights, cache.inputs)):
        if h.shape[1] != w.shape[1]:
            raise ShapeError(f"cache layer {k} does not match parameters")
    n = cache.inputs[0].shape[0]
    up = np.broadcast_to(np.asarray(upstream, dtype=np.float64), (n,))
    delta = up[:, None].copy()
    w_grads = [None] * n_layers
    b_grads = [None] * n_layers
    for k in range(n_layers - 1, -1, -1):
        if k != n_layers - 1:
            z = cache.preacts[k]
            delta = delta * np.where(z > 0, 1.0, p.alpha)
        w_grads[k] = delta.T @ cache.inputs[k]
        b_grads[k] = delta.sum(axis=0)
        delta = delta @ p.weights[k]
    grads = MlpParams(w_grads, b_grads, p.alpha)
    input_grad = delta[0] if cache.squeeze else delta
    return grads, input_grad


@dataclass
class OptState:
    """RMSProp accumulators, one per parameter array."""

    accumulators: list[np.ndarray]
    lr: float = 5e-5
    rho: float = 0.9
    eps: float = 1e-8

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.eps <= 0 or self.lr <= 0:
            raise ValueError("lr and eps must be positive")

    @classmethod
    def zeros_like(cls, arrays, lr=5e-5, rho=0.9, eps=1e-8) -> OptState:
        return cls([np.zeros_like(np.asarray(a, dtype=np.float64)) for a in arrays], lr, rho, eps)


def rmsprop_step(params, grads, state: OptState):
    """One RMSProp update over parallel lists of arrays.

    ``s <- rho*s + (1-rho)*g**2`` then ``theta <- theta - lr*g/(sqrt(s)+eps)``.
    Returns new ``(params, state)``; the inputs are left untouched.
    """
    if not (len(params) == len(grads) == len(state.accumulators)):
        raise ShapeError("params, grads and optimizer state have different lengths")
    new_params, new_acc = [], []
    for k, (theta, g, s) in enumerate(zip(params, grads, state.accumulators)):
        theta = np.asarray(theta, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if not (theta.shape == g.shape == s.shape):
            raise ShapeError(f"array {k}: param {theta.shape}, grad {g.shape}, state {s.shape}")
        bad = np.argwhere(~np.isfinite(g))
        if bad.size:
            raise NumericError(f"non-finite gradient in array {k} at index {tuple(int(i) for i in bad[0])}")
        s = state.rho * s + (1.0 - state.rho) * g * g
        new_params.append(theta - state.lr * g / (np.sqrt(s) + state.eps))
        new_acc.append(s)
    return new_params, OptState(new_acc, state.lr, state.rho, state.eps)


def clip_weights(p: MlpParams, c: float) -> MlpParams:
    """Clamp every weight and bias into ``[-c, c]``."""
    if not c > 0:
        raise ValueError(f"clip value must be positive, got {c}")
    return p.with_arrays([np.clip(a, -c, c) for a in p.arrays()])
