"""Dense ReLU network with hand-written backprop, and an Adam optimizer.

Parameters are stored in one flat vector; per-layer weights ``W_l`` shaped
(fan_in, fan_out) and biases ``b_l`` are views into it, laid out as
``W_0, b_0, W_1, b_1, ...`` (C order). The same flat layout is used for
gradients, the optimizer moments and checkpoints.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, UsageError


def count_params(layer_sizes) -> int:
    sizes = list(layer_sizes)
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def _check_sizes(layer_sizes) -> tuple[int, ...]:
    sizes = tuple(layer_sizes)
    if len(sizes) < 2:
        raise ConfigError(f"need at least an input and an output size, got {list(sizes)}")
    if not all(isinstance(s, (int, np.integer)) and s > 0 for s in sizes):
        raise ConfigError(f"layer sizes must be positive integers, got {list(sizes)}")
    return tuple(int(s) for s in sizes)


@dataclass
class MlpModel:
    layer_sizes: tuple[int, ...]
    params: np.ndarray
    _slices: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.layer_sizes = _check_sizes(self.layer_sizes)
        self.params = np.asarray(self.params, dtype=float)
        n = count_params(self.layer_sizes)
        if self.params.shape != (n,):
            raise UsageError(f"expected {n} parameters for {list(self.layer_sizes)}, got shape {self.params.shape}")
        off = 0
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = slice(off, off + fan_in * fan_out)
            off = w.stop
            b = slice(off, off + fan_out)
            off = b.stop
            self._slices.append((w, b, (fan_in, fan_out)))

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def n_layers(self) -> int:
        return len(self._slices)

    def weight(self, layer: int) -> np.ndarray:
        w, _, shape = self._slices[layer]
        return self.params[w].reshape(shape)

    def bias(self, layer: int) -> np.ndarray:
        return self.params[self._slices[layer][1]]

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for l in range(self.n_layers):
            out[f"W{l}"] = self.weight(l)
            out[f"b{l}"] = self.bias(l)
        return out

    def copy(self) -> MlpModel:
        return MlpModel(self.layer_sizes, self.params.copy())

    def forward(self, features) -> np.ndarray:
        return mlp_forward(self, features)

    def gradient(self, features, loss_grad) -> np.ndarray:
        return mlp_backward(self, features, loss_grad)


def build_mlp(layer_sizes, seed: int = 0) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    sizes = _check_sizes(layer_sizes)
    rng = np.random.default_rng(seed)
    chunks = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return MlpModel(sizes, np.concatenate(chunks))


def _check_features(model: MlpModel, features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.layer_sizes[0]:
        raise UsageError(f"expected {model.layer_sizes[0]} features per row, got shape {np.shape(features)}")
    if not np.all(np.isfinite(x)):
        raise UsageError("features must be finite")
    return x


def _forward_cache(model: MlpModel, x: np.ndarray) -> list[np.ndarray]:
    # activations a_0 = x, a_1, ..., a_L (output, no ReLU)
    acts = [x]
    last = model.n_layers - 1
    for l in range(model.n_layers):
        z = acts[-1] @ model.weight(l) + model.bias(l)
        acts.append(z if l == last else np.maximum(z, 0.0))
    return acts


def mlp_forward(model: MlpModel, features) -> np.ndarray:
    out = _forward_cache(model, _check_features(model, features))[-1]
    return out[0] if np.ndim(features) == 1 else out


def mlp_backward(model: MlpModel, features, loss_grad) -> np.ndarray:
    """Flat gradient of ``sum_rows loss_grad . output`` with respect to all parameters."""
    x = _check_features(model, features)
    g = np.asarray(loss_grad, dtype=float)
    n_out = model.layer_sizes[-1]
    if g.size != x.shape[0] * n_out:
        raise UsageError(f"loss_grad must have {n_out} entries per row, got shape {g.shape}")
    delta = g.reshape(x.shape[0], n_out)
    acts = _forward_cache(model, x)
    grad = np.empty_like(model.params)
    for l in range(model.n_layers - 1, -1, -1):
        w_sl, b_sl, _ = model._slices[l]
        grad[w_sl] = (acts[l].T @ delta).ravel()
        grad[b_sl] = delta.sum(axis=0)
        if l:
            # ReLU derivative taken as 0 at exactly 0
            delta = (delta @ model.weight(l).T) * (acts[l] > 0)
    return grad


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.m.shape != self.v.shape:
            raise UsageError(f"moment shapes differ: {self.m.shape} vs {self.v.shape}")
        if self.step < 0:
            raise UsageError("step counter must be >= 0")


def adam_init(n_params: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    if lr <= 0 or not 0 <= beta1 < 1 or not 0 <= beta2 < 1 or eps <= 0:
        raise ConfigError(f"invalid Adam hyperparameters lr={lr} beta1={beta1} beta2={beta2} eps={eps}")
    return AdamState(np.zeros(n_params), np.zeros(n_params), 0, lr, beta1, beta2, eps)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Returns new arrays; inputs are not modified."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise UsageError(f"shape mismatch: params {params.shape}, grads {grads.shape}, moments {state.m.shape}")
    t = state.step + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grads
    v = state.beta2 * state.v + (1 - state.beta2) * grads * grads
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, replace(state, m=m, v=v, step=t)
