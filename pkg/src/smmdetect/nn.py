"""Minimal gradient-checked neural-network core.

Implements exactly what the SMM detector needs: batched 1-D convolution
(cross-correlation convention, no kernel flip), ReLU, average pooling,
flatten, dense layers, softmax cross-entropy, and minibatch SGD with
momentum.  Everything is float64 numpy; backward passes are hand-derived
reverse-mode gradients verified against finite differences in the test
suite.

The detector architecture is three conv/ReLU/avgpool blocks (4, 4, 8
filters of length 9, 'same' zero padding) followed by flatten, a dense
hidden layer of 8 ReLU units, and a 2-way linear output.  Pooling uses
window 3, stride 2, symmetric zero padding 1, so feature-map lengths go
90 -> 45 -> 23 -> 12 and the flattened feature vector has 8 * 12 = 96
entries.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ValidationError


class Conv1DLayer:
    """1-D convolution over (n, c_in, d) inputs.

    out[b, j, t] = bias[j] + sum_{c,u} filters[j, c, u] * x[b, c, t + u - padding]
    with zero padding outside the input.  Filters span all input
    channels so one filter can mix sensors.
    """

    def __init__(self, n_filters: int, in_channels: int, filter_len: int, padding: int = 0):
        if filter_len < 1 or n_filters < 1 or in_channels < 1 or padding < 0:
            raise ValidationError("conv layer sizes must be positive and padding non-negative")
        self.filters = np.zeros((n_filters, in_channels, filter_len))
        self.bias = np.zeros(n_filters)
        self.padding = padding
        self._windows = None

    @classmethod
    def same(cls, n_filters: int, in_channels: int, filter_len: int) -> "Conv1DLayer":
        """'same' zero padding; requires odd filter length."""
        if filter_len % 2 == 0:
            raise ValidationError("'same' padding requires an odd filter length")
        return cls(n_filters, in_channels, filter_len, padding=(filter_len - 1) // 2)

    def describe(self) -> dict:
        return {
            "kind": "conv1d",
            "filters": self.filters.shape[0],
            "in_channels": self.filters.shape[1],
            "filter_len": self.filters.shape[2],
            "padding": self.padding,
        }

    def param_arrays(self):
        return [("filters", self.filters), ("bias", self.bias)]

    def set_params(self, filters, bias):
        filters = np.asarray(filters, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if filters.shape != self.filters.shape or bias.shape != self.bias.shape:
            raise ValidationError("conv parameter shapes do not match the layer")
        self.filters, self.bias = filters, bias

    def init(self, rng: np.random.Generator, std: float):
        self.filters = rng.normal(0.0, std, self.filters.shape) if std > 0 else np.zeros(self.filters.shape)
        self.bias = np.zeros_like(self.bias)

    def out_len(self, d: int) -> int:
        return d + 2 * self.padding - self.filters.shape[2] + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        n_f, c_in, f = self.filters.shape
        if x.ndim != 3 or x.shape[1] != c_in:
            raise ValidationError(
                f"conv expects (n, {c_in}, d) input, got shape {x.shape}"
            )
        if self.out_len(x.shape[2]) < 1:
            raise ValidationError("input shorter than the filter after padding")
        xp = np.pad(x, ((0, 0), (0, 0), (self.padding, self.padding)))
        windows = sliding_window_view(xp, f, axis=2)  # (n, c, d_out, f)
        self._windows = windows
        return np.einsum("jcu,nctu->njt", self.filters, windows) + self.bias[None, :, None]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        n_f, c_in, f = self.filters.shape
        windows = self._windows
        self.grad_bias = dout.sum(axis=(0, 2))
        self.grad_filters = np.einsum("njt,nctu->jcu", dout, windows)
        # dx is a full correlation of dout with the flipped filters
        dp = np.pad(dout, ((0, 0), (0, 0), (f - 1, f - 1)))
        dwin = sliding_window_view(dp, f, axis=2)
        dxp = np.einsum("jcu,njtu->nct", self.filters[:, :, ::-1], dwin)
        if self.padding:
            dxp = dxp[:, :, self.padding : dxp.shape[2] - self.padding]
        return dxp


class ReLULayer:
    def describe(self) -> dict:
        return {"kind": "relu"}

    def param_arrays(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.maximum(x, 0.0)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * self._mask


class AvgPoolLayer:
    """Average pooling along time with window p, stride k, and symmetric
    zero padding; padded zeros count toward the mean."""

    def __init__(self, window: int = 3, stride: int = 2, padding: int = 1):
        if window < 1 or stride < 1 or padding < 0:
            raise ValidationError("pool window and stride must be >= 1, padding >= 0")
        self.window = window
        self.stride = stride
        self.padding = padding

    def describe(self) -> dict:
        return {"kind": "avgpool", "window": self.window, "stride": self.stride, "padding": self.padding}

    def param_arrays(self):
        return []

    def out_len(self, d: int) -> int:
        padded = d + 2 * self.padding
        if padded < self.window:
            raise ValidationError(f"pool window {self.window} larger than padded input {padded}")
        return (padded - self.window) // self.stride + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        d_out = self.out_len(x.shape[2])
        xp = np.pad(x, ((0, 0), (0, 0), (self.padding, self.padding)))
        windows = sliding_window_view(xp, self.window, axis=2)[:, :, :: self.stride, :]
        self._in_len = x.shape[2]
        return windows[:, :, :d_out, :].mean(axis=3)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        n, c, d_out = dout.shape
        padded = self._in_len + 2 * self.padding
        dxp = np.zeros((n, c, padded))
        share = dout / self.window
        for u in range(self.window):
            dxp[:, :, u : u + self.stride * (d_out - 1) + 1 : self.stride] += share
        if self.padding:
            dxp = dxp[:, :, self.padding : padded - self.padding]
        return dxp


class FlattenLayer:
    def describe(self) -> dict:
        return {"kind": "flatten"}

    def param_arrays(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout.reshape(self._shape)


class DenseLayer:
    def __init__(self, out_features: int, in_features: int):
        if out_features < 1 or in_features < 1:
            raise ValidationError("dense layer sizes must be positive")
        self.weights = np.zeros((out_features, in_features))
        self.bias = np.zeros(out_features)

    def describe(self) -> dict:
        return {"kind": "dense", "out": self.weights.shape[0], "in": self.weights.shape[1]}

    def param_arrays(self):
        return [("weights", self.weights), ("bias", self.bias)]

    def set_params(self, weights, bias):
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weights.shape != self.weights.shape or bias.shape != self.bias.shape:
            raise ValidationError("dense parameter shapes do not match the layer")
        self.weights, self.bias = weights, bias

    def init(self, rng: np.random.Generator, std: float):
        self.weights = rng.normal(0.0, std, self.weights.shape) if std > 0 else np.zeros(self.weights.shape)
        self.bias = np.zeros_like(self.bias)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.weights.shape[1]:
            raise ValidationError(
                f"dense expects (n, {self.weights.shape[1]}) input, got shape {x.shape}"
            )
        self._x = x
        return x @ self.weights.T + self.bias

    def backward(self, dout: np.ndarray) -> np.ndarray:
        self.grad_weights = dout.T @ self._x
        self.grad_bias = dout.sum(axis=0)
        return dout @ self.weights


class CnnModel:
    """Ordered layer stack with a flatten layer marking the learned
    feature vector."""

    def __init__(self, layers: list, input_shape: tuple[int, int]):
        self.layers = layers
        self.input_shape = (int(input_shape[0]), int(input_shape[1]))
        self.features = None

    def architecture(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "layers": [layer.describe() for layer in self.layers],
        }

    def initialize(self, seed: int, init_std: float = 0.01) -> "CnnModel":
        """Draw all weights from N(0, init_std^2); biases zero."""
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            if hasattr(layer, "init"):
                layer.init(rng, init_std)
        return self

    def parameters(self) -> list[np.ndarray]:
        return [arr for layer in self.layers for _, arr in layer.param_arrays()]

    def set_parameters(self, arrays: list[np.ndarray]):
        expected = self.parameters()
        if len(arrays) != len(expected):
            raise ValidationError(f"expected {len(expected)} parameter arrays, got {len(arrays)}")
        it = iter(arrays)
        for layer in self.layers:
            names = [name for name, _ in layer.param_arrays()]
            if names:
                layer.set_params(*[next(it) for _ in names])

    def gradients(self) -> list[np.ndarray]:
        grads = []
        for layer in self.layers:
            for name, _ in layer.param_arrays():
                grads.append(getattr(layer, f"grad_{name}"))
        return grads

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1:] != self.input_shape:
            raise ValidationError(
                f"model expects input of shape (n, {self.input_shape[0]}, {self.input_shape[1]}), got {x.shape}"
            )
        self.features = None
        for layer in self.layers:
            x = layer.forward(x)
            if isinstance(layer, FlattenLayer):
                self.features = x
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def copy(self) -> "CnnModel":
        return copy.deepcopy(self)


def build_smm_cnn(
    in_channels: int = 9,
    input_len: int = 90,
    conv_filters: tuple[int, ...] = (4, 4, 8),
    filter_len: int = 9,
    pool_window: int = 3,
    pool_stride: int = 2,
    pool_padding: int = 1,
    hidden_units: int = 8,
    n_classes: int = 2,
) -> CnnModel:
    """Assemble the detector architecture (uninitialized parameters)."""
    layers: list = []
    c, d = in_channels, input_len
    for n_filters in conv_filters:
        layers.append(Conv1DLayer.same(n_filters, c, filter_len))
        layers.append(ReLULayer())
        pool = AvgPoolLayer(pool_window, pool_stride, pool_padding)
        layers.append(pool)
        c = n_filters
        d = pool.out_len(d)
    layers.append(FlattenLayer())
    layers.append(DenseLayer(hidden_units, c * d))
    layers.append(ReLULayer())
    layers.append(DenseLayer(n_classes, hidden_units))
    return CnnModel(layers, input_shape=(in_channels, input_len))


def init_model(seed: int, init_std: float = 0.01) -> CnnModel:
    """Freshly initialized detector model, deterministic in ``seed``."""
    return build_smm_cnn().initialize(seed, init_std)


# Functional wrappers around the layer objects.

def conv1d_forward(x: np.ndarray, layer: Conv1DLayer) -> np.ndarray:
    return layer.forward(np.asarray(x, dtype=np.float64))


def relu(m: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(m, dtype=np.float64), 0.0)


def avgpool_forward(m: np.ndarray, layer: AvgPoolLayer) -> np.ndarray:
    return layer.forward(np.asarray(m, dtype=np.float64))


def model_forward(model: CnnModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run the model; returns (flatten-layer features, logits)."""
    logits = model.forward(x)
    if model.features is None:
        raise ValidationError("model has no flatten layer; no feature vector to extract")
    return model.features, logits


def labels_to_classes(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    if y.size and not np.all(np.isin(y, (-1, 1))):
        raise ValidationError("labels must be -1 or +1")
    return ((y + 1) // 2).astype(np.int64)


def softmax_xent(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. logits.

    Labels are -1/+1, mapped to class indices 0/1.  Uses log-sum-exp
    shifting so huge logits cannot overflow.
    """
    logits = np.asarray(logits, dtype=np.float64)
    classes = labels_to_classes(y)
    n = logits.shape[0]
    if classes.shape[0] != n:
        raise ValidationError("logits and labels must agree in length")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = -log_probs[np.arange(n), classes].mean()
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), classes] -= 1.0
    return float(loss), dlogits / n


def model_backward(model: CnnModel, x: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
    """Analytic gradients of the mean cross-entropy loss for every
    parameter, in ``model.parameters()`` order."""
    _, grads = loss_and_gradients(model, x, y)
    return grads


def loss_and_gradients(model: CnnModel, x: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    logits = model.forward(x)
    loss, dlogits = softmax_xent(logits, y)
    model.backward(dlogits)
    return loss, model.gradients()


def sgd_momentum_step(params, grads, velocity, lr: float, mu: float):
    """One momentum update: v' = mu*v - lr*g; theta' = theta + v'.

    Accepts a list of arrays (or a single array) and returns new arrays.
    """
    single = isinstance(params, np.ndarray)
    if single:
        params, grads, velocity = [params], [grads], [velocity]
    new_params, new_velocity = [], []
    for p, g, v in zip(params, grads, velocity):
        v_next = mu * v - lr * g
        new_params.append(p + v_next)
        new_velocity.append(v_next)
    if single:
        return new_params[0], new_velocity[0]
    return new_params, new_velocity


@dataclass
class TrainConfig:
    """Trainer hyperparameters.  Only the momentum value (0.9) is fixed
    by the detector design; the rest are explicit, sweep-able defaults.
    Zero learning rate or zero epochs are allowed for diagnostic runs.
    """

    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 30
    batch_size: int = 64
    init_std: float = 0.01
    seed: int = 0

    def validate(self):
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be non-negative")
        if not (0 <= self.momentum < 1):
            raise ValidationError("momentum must be in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValidationError("epochs must be >= 0 and batch_size >= 1")
        if self.init_std < 0:
            raise ValidationError("init_std must be non-negative")

    def as_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "init_std": self.init_std,
            "seed": self.seed,
        }


def train(model: CnnModel, x: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> tuple[CnnModel, list[float]]:
    """Minibatch SGD with momentum; mutates and returns ``model``.

    Each epoch reshuffles with the generator derived from ``cfg.seed``
    and runs ceil(n / batch_size) steps.  The returned history holds the
    per-epoch mean loss (sample-weighted, so it is exact for the
    parameters held during that epoch).
    """
    cfg.validate()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    n = x.shape[0]
    if n == 0:
        raise ValidationError("cannot train on empty data")
    rng = np.random.default_rng(cfg.seed)
    velocity = [np.zeros_like(p) for p in model.parameters()]
    history = []
    for _epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for i in range(0, n, cfg.batch_size):
            batch = order[i : i + cfg.batch_size]
            loss, grads = loss_and_gradients(model, x[batch], y[batch])
            total += loss * len(batch)
            params, velocity = sgd_momentum_step(model.parameters(), grads, velocity, cfg.learning_rate, cfg.momentum)
            model.set_parameters(params)
        history.append(total / n)
    return model, history
