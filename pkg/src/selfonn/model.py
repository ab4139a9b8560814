"""1D Self-ONN model: operational convolution layers built from generative neurons.

A generative neuron replaces the plain multiply of a convolutional kernel
element with a learned polynomial: each kernel tap r holds Q coefficients
w(r, 1..Q), and its contribution at input value y is

    w(r, 1) * y + w(r, 2) * y^2 + ... + w(r, Q) * y^Q

The constant term of the polynomial is absorbed into the per-neuron bias.
With Q = 1 every layer degenerates to a standard convolution, so a Q = 1
model is exactly a plain CNN.

Two forward implementations are provided.  ``operational_conv_direct``
evaluates the tap/order double sum literally at every output position and
exists as a slow, independent oracle.  ``operational_conv_forward`` is the
production path: it raises the input map to elementwise powers 1..Q once
and then runs Q ordinary strided convolutions via an im2col matmul, which
is algebraically the same sum reassociated for BLAS.

Feature maps are plain float arrays of shape [channels, length].
Convolution weights are indexed [out, in, tap, order] and dense
(generative perceptron) weights [out, in, order].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

PAD_SAME = "same"
PAD_VALID = "valid"


def conv_geometry(length: int, kernel: int, stride: int, padding: str = PAD_SAME):
    """Output length and zero padding for one convolution.

    "same" keeps output length at ceil(length / stride) with a left pad of
    (kernel - 1) // 2; "valid" slides the kernel only over fully covered
    positions.  Returns (out_len, pad_left, pad_right).
    """
    if kernel <= 0 or stride <= 0:
        raise ValueError(f"kernel and stride must be > 0, got K={kernel} S={stride}")
    if padding == PAD_SAME:
        out_len = -(-length // stride)
        pad_left = (kernel - 1) // 2
        pad_right = max(0, (out_len - 1) * stride + kernel - pad_left - length)
        return out_len, pad_left, pad_right
    if padding == PAD_VALID:
        if length < kernel:
            raise ValueError(f"input length {length} shorter than kernel {kernel}")
        return (length - kernel) // stride + 1, 0, 0
    raise ValueError(f"unknown padding mode {padding!r}")


def tanh_apply(x: np.ndarray) -> np.ndarray:
    """Elementwise hyperbolic tangent."""
    return np.tanh(x)


def raise_to_powers(x: np.ndarray, q_order: int) -> np.ndarray:
    """Stack elementwise powers x^1 .. x^Q along a new leading axis."""
    if q_order < 1:
        raise ValueError(f"q_order must be >= 1, got {q_order}")
    z = np.empty((q_order,) + x.shape, dtype=x.dtype)
    z[0] = x
    for q in range(1, q_order):
        z[q] = z[q - 1] * x
    return z


@dataclass
class OperationalConvLayer:
    """One operational layer: weights [out, in, K, Q], one bias per output neuron."""

    weights: np.ndarray
    biases: np.ndarray
    stride: int = 1

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ValueError(f"conv weights must be 4D [out, in, K, Q], got {self.weights.shape}")
        if self.biases.shape != (self.weights.shape[0],):
            raise ValueError(
                f"biases shape {self.biases.shape} does not match {self.weights.shape[0]} output neurons"
            )
        if self.stride <= 0:
            raise ValueError(f"stride must be > 0, got {self.stride}")

    @property
    def out_neurons(self) -> int:
        return self.weights.shape[0]

    @property
    def in_neurons(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[2]

    @property
    def q_order(self) -> int:
        return self.weights.shape[3]


@dataclass
class GenerativeDenseLayer:
    """Fully connected generative-perceptron layer: weights [out, in, Q]."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 3:
            raise ValueError(f"dense weights must be 3D [out, in, Q], got {self.weights.shape}")
        if self.biases.shape != (self.weights.shape[0],):
            raise ValueError(
                f"biases shape {self.biases.shape} does not match {self.weights.shape[0]} outputs"
            )

    @property
    def out_features(self) -> int:
        return self.weights.shape[0]

    @property
    def in_features(self) -> int:
        return self.weights.shape[1]

    @property
    def q_order(self) -> int:
        return self.weights.shape[2]


class OpLayerSpec(NamedTuple):
    out_neurons: int
    kernel_size: int
    stride: int


DEFAULT_OP_LAYERS = (
    OpLayerSpec(16, 81, 2),
    OpLayerSpec(16, 41, 2),
    OpLayerSpec(16, 21, 2),
    OpLayerSpec(16, 7, 2),
    OpLayerSpec(16, 7, 2),
)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description; the default is the 7-layer fault detector.

    Five operational layers (kernel sizes 81/41/21/7/7, stride 2, 16 neurons
    each, 80 in total), a dense layer of 32 generative perceptrons and a
    2-unit output layer, all with Q = 3 and tanh activations.
    """

    input_length: int = 4096
    op_layers: tuple[OpLayerSpec, ...] = DEFAULT_OP_LAYERS
    q_order: int = 3
    dense_width: int = 32
    output_classes: int = 2

    def __post_init__(self):
        if self.input_length <= 0:
            raise ValueError(f"input_length must be > 0, got {self.input_length}")
        if self.q_order < 1:
            raise ValueError(f"q_order must be >= 1, got {self.q_order}")
        if not self.op_layers:
            raise ValueError("at least one operational layer is required")
        layers = tuple(OpLayerSpec(*spec) for spec in self.op_layers)
        object.__setattr__(self, "op_layers", layers)
        for spec in layers:
            if min(spec) <= 0:
                raise ValueError(f"invalid layer spec {spec}")
        if self.dense_width <= 0 or self.output_classes <= 0:
            raise ValueError("dense_width and output_classes must be > 0")


@dataclass
class ModelParameters:
    """Learnable values for one ModelConfig: conv stack, dense layer, output layer."""

    conv: list[OperationalConvLayer]
    dense: GenerativeDenseLayer
    output: GenerativeDenseLayer

    @property
    def dtype(self):
        return self.conv[0].weights.dtype


def shape_trace(config: ModelConfig) -> list[tuple[int, int]]:
    """(channels, length) after each operational layer, starting from the input."""
    trace = [(1, config.input_length)]
    length = config.input_length
    for spec in config.op_layers:
        length = conv_geometry(length, spec.kernel_size, spec.stride, PAD_SAME)[0]
        trace.append((spec.out_neurons, length))
    return trace


def flatten_width(config: ModelConfig) -> int:
    channels, length = shape_trace(config)[-1]
    return channels * length


def param_count(config: ModelConfig) -> int:
    """Closed-form learnable parameter count for a config."""
    total = 0
    in_neurons = 1
    for spec in config.op_layers:
        total += spec.out_neurons * in_neurons * spec.kernel_size * config.q_order
        total += spec.out_neurons
        in_neurons = spec.out_neurons
    total += config.dense_width * flatten_width(config) * config.q_order + config.dense_width
    total += config.output_classes * config.dense_width * config.q_order + config.output_classes
    return total


def init_parameters(config: ModelConfig, seed, dtype=np.float32) -> ModelParameters:
    """Deterministic uniform initialization, biases zero.

    Each weight is drawn uniform in +-sqrt(6 / (fan_in + fan_out)) where the
    fans count every polynomial coefficient feeding a connection.
    """
    rng = np.random.default_rng(seed)

    def draw(shape, fan_in, fan_out):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    conv = []
    in_neurons = 1
    for spec in config.op_layers:
        k, q = spec.kernel_size, config.q_order
        w = draw((spec.out_neurons, in_neurons, k, q), in_neurons * k * q, spec.out_neurons * k * q)
        conv.append(OperationalConvLayer(w, np.zeros(spec.out_neurons, dtype=dtype), spec.stride))
        in_neurons = spec.out_neurons

    width = flatten_width(config)
    q = config.q_order
    dense = GenerativeDenseLayer(
        draw((config.dense_width, width, q), width * q, config.dense_width * q),
        np.zeros(config.dense_width, dtype=dtype),
    )
    output = GenerativeDenseLayer(
        draw((config.output_classes, config.dense_width, q), config.dense_width * q, config.output_classes * q),
        np.zeros(config.output_classes, dtype=dtype),
    )
    return ModelParameters(conv, dense, output)


def zero_parameters(config: ModelConfig, dtype=np.float32) -> ModelParameters:
    """All-zero parameter blocks (forward output is exactly zero everywhere)."""
    conv = []
    in_neurons = 1
    for spec in config.op_layers:
        w = np.zeros((spec.out_neurons, in_neurons, spec.kernel_size, config.q_order), dtype=dtype)
        conv.append(OperationalConvLayer(w, np.zeros(spec.out_neurons, dtype=dtype), spec.stride))
        in_neurons = spec.out_neurons
    dense = GenerativeDenseLayer(
        np.zeros((config.dense_width, flatten_width(config), config.q_order), dtype=dtype),
        np.zeros(config.dense_width, dtype=dtype),
    )
    output = GenerativeDenseLayer(
        np.zeros((config.output_classes, config.dense_width, config.q_order), dtype=dtype),
        np.zeros(config.output_classes, dtype=dtype),
    )
    return ModelParameters(conv, dense, output)


def clone_parameters(params: ModelParameters) -> ModelParameters:
    conv = [
        OperationalConvLayer(l.weights.copy(), l.biases.copy(), l.stride) for l in params.conv
    ]
    dense = GenerativeDenseLayer(params.dense.weights.copy(), params.dense.biases.copy())
    output = GenerativeDenseLayer(params.output.weights.copy(), params.output.biases.copy())
    return ModelParameters(conv, dense, output)


def param_blocks(params: ModelParameters) -> list[np.ndarray]:
    """Parameter arrays in canonical order: per conv layer (weights, biases), dense, output."""
    blocks = []
    for layer in params.conv:
        blocks.append(layer.weights)
        blocks.append(layer.biases)
    blocks.extend([params.dense.weights, params.dense.biases])
    blocks.extend([params.output.weights, params.output.biases])
    return blocks


def check_compatible(params: ModelParameters, config: ModelConfig):
    """Raise ValueError unless parameter block shapes match the config exactly."""
    if len(params.conv) != len(config.op_layers):
        raise ValueError(
            f"config has {len(config.op_layers)} operational layers, parameters have {len(params.conv)}"
        )
    in_neurons = 1
    for idx, (layer, spec) in enumerate(zip(params.conv, config.op_layers)):
        expect = (spec.out_neurons, in_neurons, spec.kernel_size, config.q_order)
        if layer.weights.shape != expect or layer.stride != spec.stride:
            raise ValueError(
                f"conv layer {idx}: expected weights {expect} stride {spec.stride}, "
                f"got {layer.weights.shape} stride {layer.stride}"
            )
        in_neurons = spec.out_neurons
    width = flatten_width(config)
    if params.dense.weights.shape != (config.dense_width, width, config.q_order):
        raise ValueError(
            f"dense weights {params.dense.weights.shape} do not match "
            f"({config.dense_width}, {width}, {config.q_order})"
        )
    if params.output.weights.shape != (config.output_classes, config.dense_width, config.q_order):
        raise ValueError(
            f"output weights {params.output.weights.shape} do not match "
            f"({config.output_classes}, {config.dense_width}, {config.q_order})"
        )


# ---------------------------------------------------------------------------
# forward passes


def operational_conv_direct(layer: OperationalConvLayer, x: np.ndarray,
                            padding: str = PAD_SAME) -> np.ndarray:
    """Oracle form: evaluate the tap/order double sum literally per position.

    Slow by design; kept free of the power-map/im2col machinery of the
    production path so the two can check each other.
    """
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != layer.in_neurons:
        raise ValueError(
            f"input must be [channels={layer.in_neurons}, length], got shape {x.shape}"
        )
    channels, length = x.shape
    kernel, stride, q_order = layer.kernel_size, layer.stride, layer.q_order
    out_len, pad_left, pad_right = conv_geometry(length, kernel, stride, padding)

    padded = np.zeros((channels, pad_left + length + pad_right), dtype=x.dtype)
    padded[:, pad_left:pad_left + length] = x

    exps = np.arange(1, q_order + 1, dtype=x.dtype)
    out = np.empty((layer.out_neurons, out_len), dtype=x.dtype)
    for m in range(out_len):
        window = padded[:, m * stride:m * stride + kernel]          # [in, K]
        powers = window[None, :, :] ** exps[:, None, None]          # [Q, in, K]
        out[:, m] = layer.biases + np.einsum("oikq,qik->o", layer.weights, powers)
    return out


@dataclass
class ConvCache:
    powers: np.ndarray      # [Q, in, L] input raised to powers 1..Q
    cols: np.ndarray        # [Q*in*K, M] im2col matrix over the padded powers
    activated: np.ndarray   # [out, M] post-tanh output of this layer
    pad_left: int
    in_len: int
    padded_len: int


@dataclass
class DenseCache:
    powers: np.ndarray      # [Q, in]
    activated: np.ndarray   # [out]


@dataclass
class ModelCache:
    conv: list[ConvCache]
    dense: DenseCache
    output: DenseCache
    flat_shape: tuple[int, int]
    prediction: np.ndarray


def _weights_matrix(layer: OperationalConvLayer) -> np.ndarray:
    # [out, in, K, Q] -> [out, Q*in*K] with order index outermost, matching _im2col
    return np.ascontiguousarray(layer.weights.transpose(0, 3, 1, 2)).reshape(layer.out_neurons, -1)


def _im2col(powers: np.ndarray, kernel: int, stride: int, out_len: int,
            pad_left: int, pad_right: int) -> np.ndarray:
    q_order, channels, length = powers.shape
    padded = np.zeros((q_order, channels, pad_left + length + pad_right), dtype=powers.dtype)
    padded[:, :, pad_left:pad_left + length] = powers
    windows = np.lib.stride_tricks.sliding_window_view(padded, kernel, axis=-1)
    windows = windows[:, :, ::stride, :][:, :, :out_len, :]         # [Q, in, M, K]
    return windows.transpose(0, 1, 3, 2).reshape(q_order * channels * kernel, out_len)


def conv_forward_cached(layer: OperationalConvLayer, x: np.ndarray,
                        padding: str = PAD_SAME) -> tuple[np.ndarray, ConvCache]:
    """Production forward pass; returns pre-activation and the backprop cache."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != layer.in_neurons:
        raise ValueError(
            f"input must be [channels={layer.in_neurons}, length], got shape {x.shape}"
        )
    channels, length = x.shape
    out_len, pad_left, pad_right = conv_geometry(length, layer.kernel_size, layer.stride, padding)
    powers = raise_to_powers(x, layer.q_order)
    cols = _im2col(powers, layer.kernel_size, layer.stride, out_len, pad_left, pad_right)
    pre = _weights_matrix(layer) @ cols + layer.biases[:, None]
    cache = ConvCache(powers, cols, np.empty(0), pad_left, length,
                      pad_left + length + pad_right)
    return pre, cache


def operational_conv_forward(layer: OperationalConvLayer, x: np.ndarray,
                             padding: str = PAD_SAME) -> np.ndarray:
    """Fast factorized forward pass: Q strided convolutions over power maps."""
    return conv_forward_cached(layer, x, padding)[0]


def _dense_weights_matrix(layer: GenerativeDenseLayer) -> np.ndarray:
    # [out, in, Q] -> [out, Q*in]
    return np.ascontiguousarray(layer.weights.transpose(0, 2, 1)).reshape(layer.out_features, -1)


def dense_forward_cached(layer: GenerativeDenseLayer,
                         x: np.ndarray) -> tuple[np.ndarray, DenseCache]:
    x = np.asarray(x)
    if x.shape != (layer.in_features,):
        raise ValueError(f"input length {x.shape} does not match in_features {layer.in_features}")
    powers = raise_to_powers(x, layer.q_order)                      # [Q, in]
    pre = _dense_weights_matrix(layer) @ powers.reshape(-1) + layer.biases
    return pre, DenseCache(powers, np.empty(0))


def generative_dense_forward(layer: GenerativeDenseLayer, x: np.ndarray) -> np.ndarray:
    """Dense generative-perceptron map: out_k = b_k + sum_i sum_q w[k,i,q] x_i^q."""
    return dense_forward_cached(layer, x)[0]


def _segment_values(segment, config: ModelConfig, dtype) -> np.ndarray:
    values = np.asarray(getattr(segment, "values", segment))
    if values.shape != (config.input_length,):
        raise ValueError(
            f"segment must hold {config.input_length} samples, got shape {values.shape}"
        )
    return values.astype(dtype, copy=False)


def model_forward_cached(params: ModelParameters, config: ModelConfig,
                         segment) -> tuple[np.ndarray, ModelCache]:
    """Full forward pass keeping every intermediate needed for backprop."""
    check_compatible(params, config)
    x = _segment_values(segment, config, params.dtype)[None, :]

    conv_caches = []
    for layer in params.conv:
        pre, cache = conv_forward_cached(layer, x)
        x = tanh_apply(pre)
        cache.activated = x
        conv_caches.append(cache)

    flat_shape = x.shape
    flat = x.reshape(-1)                                            # channel-major

    pre, dense_cache = dense_forward_cached(params.dense, flat)
    hidden = tanh_apply(pre)
    dense_cache.activated = hidden

    pre, out_cache = dense_forward_cached(params.output, hidden)
    prediction = tanh_apply(pre)
    out_cache.activated = prediction

    return prediction, ModelCache(conv_caches, dense_cache, out_cache, flat_shape, prediction)


def model_forward(params: ModelParameters, config: ModelConfig, segment) -> np.ndarray:
    """Classify one normalized segment; returns the two output activations."""
    check_compatible(params, config)
    x = _segment_values(segment, config, params.dtype)[None, :]
    for layer in params.conv:
        x = tanh_apply(operational_conv_forward(layer, x))
    hidden = tanh_apply(generative_dense_forward(params.dense, x.reshape(-1)))
    return tanh_apply(generative_dense_forward(params.output, hidden))
