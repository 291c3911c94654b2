"""Minimal from-scratch neural nets: dense and conv layers, backprop,
full-batch gradient descent on mean squared error.

Everything is float64 numpy, deterministic given the spec seed, and
sized for small scalar-output regression nets (a 10-layer dense stack,
a 7-layer CNN over day-by-bucket images, and a one-hidden-layer
"moments" net).  No minibatching, no momentum: plain gradient descent,
which is all these shallow problems need and keeps runs reproducible.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

ACTIVATIONS = ("relu", "tanh", "logit", "linear")


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


# ── layer specs ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Dense:
    n_in: int
    n_out: int


@dataclass(frozen=True)
class Conv2D:
    kernel: tuple[int, int]
    channels: int


@dataclass(frozen=True)
class Pool:
    size: tuple[int, int] = (2, 2)


@dataclass(frozen=True)
class Flatten:
    pass


LayerSpec = Union[Dense, Conv2D, Pool, Flatten]


@dataclass(frozen=True)
class NetSpec:
    layers: tuple[LayerSpec, ...]
    activation: str = "relu"
    seed: int = 0
    input_shape: tuple[int, ...] = ()  # () = infer from a leading Dense

    def __post_init__(self):
        if not self.layers:
            raise ValueError("net needs at least one layer")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


def shallow_spec(n_inputs: int = 4, hidden: int = 8, activation: str = "tanh",
                 seed: int = 0) -> NetSpec:
    """One-hidden-layer net for the four-moment inputs."""
    return NetSpec((Dense(n_inputs, hidden), Dense(hidden, 1)), activation, seed,
                   input_shape=(n_inputs,))


def deep10_spec(n_inputs: int = 16, activation: str = "relu", seed: int = 0) -> NetSpec:
    """10 dense layers, 16-dim input to scalar output."""
    widths = [n_inputs, 32, 32, 24, 24, 16, 16, 8, 8, 4, 1]
    layers = tuple(Dense(a, b) for a, b in zip(widths, widths[1:]))
    return NetSpec(layers, activation, seed, input_shape=(n_inputs,))


def cnn7_spec(input_shape: tuple[int, int] = (21, 16), hidden: int = 32,
              activation: str = "relu", seed: int = 0) -> NetSpec:
    """7-layer CNN over a days-by-buckets image: conv, pool, conv, pool,
    flatten, dense, dense-to-scalar."""
    h, w = input_shape
    oh, ow = (h - 2) // 2, (w - 2) // 2          # conv 3x3 then pool 2x2
    oh, ow = (oh - 2) // 2, (ow - 2) // 2        # conv 3x3 then pool 2x2
    flat = 16 * oh * ow
    layers = (
        Conv2D((3, 3), 8),
        Pool((2, 2)),
        Conv2D((3, 3), 16),
        Pool((2, 2)),
        Flatten(),
        Dense(flat, hidden),
        Dense(hidden, 1),
    )
    return NetSpec(layers, activation, seed, input_shape=input_shape)


# ── runtime layers ─────────────────────────────────────────────────────

class _DenseOp:
    def __init__(self, spec: Dense, rng: np.random.Generator):
        bound = 1.0 / np.sqrt(spec.n_in)
        self.weights = rng.uniform(-bound, bound, size=(spec.n_in, spec.n_out))
        self.bias = np.zeros(spec.n_out)

    def forward(self, x):
        self._x = x
        return x @ self.weights + self.bias

    def backward(self, grad):
        self.d_weights = self._x.T @ grad
        self.d_bias = grad.sum(axis=0)
        return grad @ self.weights.T

    def params(self):
        return [("weights", self.weights, "d_weights"), ("bias", self.bias, "d_bias")]


class _ConvOp:
    def __init__(self, spec: Conv2D, in_channels: int, rng: np.random.Generator):
        kh, kw = spec.kernel
        fan_in = in_channels * kh * kw
        bound = 1.0 / np.sqrt(fan_in)
        self.weights = rng.uniform(-bound, bound, size=(spec.channels, in_channels, kh, kw))
        self.bias = np.zeros(spec.channels)
        self.kernel = spec.kernel

    def forward(self, x):
        self._x = x
        kh, kw = self.kernel
        windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
        self._windows = windows
        out = np.einsum("nchwkl,ockl->nohw", windows, self.weights, optimize=True)
        return out + self.bias[None, :, None, None]

    def backward(self, grad):
        kh, kw = self.kernel
        self.d_weights = np.einsum("nchwkl,nohw->ockl", self._windows, grad, optimize=True)
        self.d_bias = grad.sum(axis=(0, 2, 3))
        dx = np.zeros_like(self._x)
        oh, ow = grad.shape[2], grad.shape[3]
        for k in range(kh):
            for l in range(kw):
                dx[:, :, k:k + oh, l:l + ow] += np.einsum(
                    "nohw,oc->nchw", grad, self.weights[:, :, k, l], optimize=True)
        return dx

    def params(self):
        return [("weights", self.weights, "d_weights"), ("bias", self.bias, "d_bias")]


class _PoolOp:
    def __init__(self, spec: Pool):
        self.size = spec.size

    def forward(self, x):
        ph, pw = self.size
        n, c, h, w = x.shape
        oh, ow = h // ph, w // pw
        self._in_shape = x.shape
        xr = x[:, :, :oh * ph, :ow * pw].reshape(n, c, oh, ph, ow, pw)
        flat = xr.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, ph * pw)
        self.switches = flat.argmax(axis=-1)
        return flat.max(axis=-1)

    def backward(self, grad):
        ph, pw = self.size
        n, c, h, w = self._in_shape
        oh, ow = grad.shape[2], grad.shape[3]
        dflat = np.zeros((n, c, oh, ow, ph * pw))
        np.put_along_axis(dflat, self.switches[..., None], grad[..., None], axis=-1)
        dx = np.zeros(self._in_shape)
        dx[:, :, :oh * ph, :ow * pw] = (
            dflat.reshape(n, c, oh, ow, ph, pw).transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, oh * ph, ow * pw))
        return dx

    def params(self):
        return []


class _FlattenOp:
    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)

    def params(self):
        return []


class _ActivationOp:
    def __init__(self, kind: str):
        self.kind = kind

    def forward(self, x):
        self._x = x
        if self.kind == "relu":
            self.pattern = x > 0
            return np.where(self.pattern, x, 0.0)
        if self.kind == "tanh":
            self._y = np.tanh(x)
            return self._y
        if self.kind == "logit":
            self._y = 1.0 / (1.0 + np.exp(-x))
            return self._y
        return x

    def backward(self, grad):
        if self.kind == "relu":
            return grad * self.pattern
        if self.kind == "tanh":
            return grad * (1.0 - self._y**2)
        if self.kind == "logit":
            return grad * self._y * (1.0 - self._y)
        return grad

    def params(self):
        return []


@dataclass
class TrainedNet:
    spec: NetSpec
    ops: list
    loss_curve: list[float]

    def weight_arrays(self) -> list[np.ndarray]:
        return [arr for op in self.ops for _, arr, _ in op.params()]


# ── construction ───────────────────────────────────────────────────────

def _infer_input_shape(spec: NetSpec) -> tuple[int, ...]:
    if spec.input_shape:
        return spec.input_shape
    first = spec.layers[0]
    if isinstance(first, Dense):
        return (first.n_in,)
    raise ValueError("input_shape is required when the first layer is not Dense")


def init_net(spec: NetSpec) -> TrainedNet:
    """Build a net with seeded fan-in-scaled uniform weights, zero biases.

    Walks the layer chain validating that shapes compose; a mismatch
    reports the offending layer pair.
    """
    rng = np.random.default_rng(spec.seed)
    shape = _infer_input_shape(spec)
    if len(shape) == 2:
        shape = (1,) + shape  # single input channel
    ops: list = []
    for i, layer in enumerate(spec.layers):
        where = f"layer {i + 1} ({type(layer).__name__})"
        if isinstance(layer, Dense):
            if len(shape) != 1:
                raise ValueError(f"{where}: expected flat input, got shape {shape}; "
                                 "add a Flatten layer")
            if shape[0] != layer.n_in:
                raise ValueError(
                    f"shape mismatch between layer {i} (out {shape[0]}) and {where} "
                    f"(in {layer.n_in})")
            ops.append(_DenseOp(layer, rng))
            shape = (layer.n_out,)
        elif isinstance(layer, Conv2D):
            if len(shape) != 3:
                raise ValueError(f"{where}: expected image input, got shape {shape}")
            c, h, w = shape
            kh, kw = layer.kernel
            if h < kh or w < kw:
                raise ValueError(f"{where}: kernel {layer.kernel} larger than input {(h, w)}")
            ops.append(_ConvOp(layer, c, rng))
            shape = (layer.channels, h - kh + 1, w - kw + 1)
        elif isinstance(layer, Pool):
            if len(shape) != 3:
                raise ValueError(f"{where}: expected image input, got shape {shape}")
            c, h, w = shape
            ph, pw = layer.size
            if h < ph or w < pw:
                raise ValueError(f"{where}: pool {layer.size} larger than input {(h, w)}")
            ops.append(_PoolOp(layer))
            shape = (c, h // ph, w // pw)
        elif isinstance(layer, Flatten):
            ops.append(_FlattenOp())
            shape = (int(np.prod(shape)),)
        else:
            raise ValueError(f"{where}: unknown layer spec")
        if _is_weighted(layer) and i < _last_weighted_index(spec):
            ops.append(_ActivationOp(spec.activation))
    if shape != (1,):
        raise ValueError(f"net output shape is {shape}, expected scalar (1,)")
    return TrainedNet(spec=spec, ops=ops, loss_curve=[])


def _is_weighted(layer: LayerSpec) -> bool:
    return isinstance(layer, (Dense, Conv2D))


def _last_weighted_index(spec: NetSpec) -> int:
    return max(i for i, layer in enumerate(spec.layers) if _is_weighted(layer))


# ── forward / training ─────────────────────────────────────────────────

def _as_batch(net: TrainedNet, inputs: np.ndarray) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    expect = _infer_input_shape(net.spec)
    if x.shape == expect:
        x = x[None, ...]
    if x.shape[1:] != expect:
        raise ValueError(f"input shape {x.shape[1:]} does not match net input {expect}")
    if len(expect) == 2:
        x = x[:, None, :, :]  # add channel axis
    return x


def forward_batch(net: TrainedNet, inputs: np.ndarray) -> np.ndarray:
    x = _as_batch(net, inputs)
    for op in net.ops:
        x = op.forward(x)
    return x[:, 0]


def predict(net: TrainedNet, inputs: np.ndarray) -> float:
    """Forward pass for a single input; returns the scalar output."""
    x = np.asarray(inputs, dtype=float)
    if x.shape != _infer_input_shape(net.spec):
        raise ValueError(f"input shape {x.shape} does not match net input "
                         f"{_infer_input_shape(net.spec)}")
    return float(forward_batch(net, x)[0])


def train(net: TrainedNet, inputs: np.ndarray, targets: np.ndarray, rounds: int,
          learning_rate: float) -> TrainedNet:
    """Full-batch gradient descent on MSE; returns a new trained net.

    The input net is left untouched.  Aborts with the round number if
    the loss goes non-finite.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    targets = np.asarray(targets, dtype=float).reshape(-1)
    net = copy.deepcopy(net)
    x0 = _as_batch(net, np.asarray(inputs, dtype=float))
    if x0.shape[0] != targets.size:
        raise ValueError("inputs and targets are not aligned")

    with np.errstate(over="ignore", invalid="ignore"):
        for round_no in range(1, rounds + 1):
            x = x0
            for op in net.ops:
                x = op.forward(x)
            pred = x[:, 0]
            err = pred - targets
            loss = float(np.mean(err**2))
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at round {round_no}")
            net.loss_curve.append(loss)
            grad = (2.0 * err / err.size)[:, None]
            for op in reversed(net.ops):
                grad = op.backward(grad)
            for op in net.ops:
                for _, arr, grad_name in op.params():
                    arr -= learning_rate * getattr(op, grad_name)
    return net


# ── gradient verification ──────────────────────────────────────────────

def _loss_and_patterns(net: TrainedNet, x0: np.ndarray, targets: np.ndarray):
    x = x0
    patterns = []
    for op in net.ops:
        x = op.forward(x)
        if isinstance(op, _ActivationOp) and op.kind == "relu":
            patterns.append(op.pattern.copy())
        elif isinstance(op, _PoolOp):
            patterns.append(op.switches.copy())
    return float(np.mean((x[:, 0] - targets) ** 2)), patterns


def grad_check(net: TrainedNet, inputs: np.ndarray, targets: np.ndarray,
               epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference grads.

    Perturbations that flip a ReLU sign or a pool switch are excluded:
    the loss is not differentiable across those kinks, so the
    comparison is only meaningful away from them.
    """
    net = copy.deepcopy(net)
    targets = np.asarray(targets, dtype=float).reshape(-1)
    x0 = _as_batch(net, np.asarray(inputs, dtype=float))

    x = x0
    for op in net.ops:
        x = op.forward(x)
    err = x[:, 0] - targets
    grad = (2.0 * err / err.size)[:, None]
    for op in reversed(net.ops):
        grad = op.backward(grad)

    worst = 0.0
    for op in net.ops:
        for _, arr, grad_name in op.params():
            analytic = getattr(op, grad_name)
            flat = arr.reshape(-1)
            aflat = analytic.reshape(-1)
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + epsilon
                up, pat_up = _loss_and_patterns(net, x0, targets)
                flat[idx] = orig - epsilon
                down, pat_down = _loss_and_patterns(net, x0, targets)
                flat[idx] = orig
                if any(not np.array_equal(a, b) for a, b in zip(pat_up, pat_down)):
                    continue  # kink crossed; comparison invalid here
                numeric = (up - down) / (2.0 * epsilon)
                scale = max(abs(aflat[idx]), abs(numeric), 1e-8)
                worst = max(worst, abs(aflat[idx] - numeric) / scale)
    return worst


# ── serialization ──────────────────────────────────────────────────────

def spec_to_dict(spec: NetSpec) -> dict:
    layers = []
    for layer in spec.layers:
        if isinstance(layer, Dense):
            layers.append({"type": "dense", "n_in": layer.n_in, "n_out": layer.n_out})
        elif isinstance(layer, Conv2D):
            layers.append({"type": "conv2d", "kernel": list(layer.kernel),
                           "channels": layer.channels})
        elif isinstance(layer, Pool):
            layers.append({"type": "pool", "size": list(layer.size)})
        else:
            layers.append({"type": "flatten"})
    return {"layers": layers, "activation": spec.activation, "seed": spec.seed,
            "input_shape": list(spec.input_shape)}


def spec_from_dict(data: dict) -> NetSpec:
    layers: list[LayerSpec] = []
    for item in data["layers"]:
        kind = item["type"]
        if kind == "dense":
            layers.append(Dense(item["n_in"], item["n_out"]))
        elif kind == "conv2d":
            layers.append(Conv2D(tuple(item["kernel"]), item["channels"]))
        elif kind == "pool":
            layers.append(Pool(tuple(item["size"])))
        elif kind == "flatten":
            layers.append(Flatten())
        else:
            raise ValueError(f"unknown layer type {kind!r}")
    return NetSpec(tuple(layers), data["activation"], data["seed"],
                   tuple(data.get("input_shape", ())))


def write_loss_csv(net: TrainedNet, handle) -> None:
    handle.write("round,mse\n")
    for i, loss in enumerate(net.loss_curve, start=1):
        handle.write(f"{i},{loss!r}\n")


def save_net(net: TrainedNet, path_prefix: str) -> None:
    with open(path_prefix + ".spec.json", "w", encoding="utf-8") as handle:
        json.dump({"spec": spec_to_dict(net.spec), "loss_curve": net.loss_curve},
                  handle, sort_keys=True)
    arrays = {f"w{i}": arr for i, arr in enumerate(net.weight_arrays())}
    np.savez(path_prefix + ".weights.npz", **arrays)


def load_net(path_prefix: str) -> TrainedNet:
    with open(path_prefix + ".spec.json", encoding="utf-8") as handle:
        data = json.load(handle)
    net = init_net(spec_from_dict(data["spec"]))
    net.loss_curve = list(data.get("loss_curve", []))
    stored = np.load(path_prefix + ".weights.npz")
    for i, arr in enumerate(net.weight_arrays()):
        arr[...] = stored[f"w{i}"]
    return net
