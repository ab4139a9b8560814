"""MSE training of Self-ONN models: analytic backprop, Adam, and the epoch loop.

Gradients are derived by hand from the generative-neuron forward pass.
For a kernel tap r of order q the pre-activation is linear in the weight
with coefficient y^q, so

    d pre / d w(r, q)   = y(input window)^q
    d pre / d y(n)      = sum over taps/orders of q * w(r, q) * y(n)^(q-1)

chained through tanh (d tanh = 1 - tanh^2) and the mean-squared-error
loss.  A central finite-difference oracle over every parameter entry is
provided for verification in 64-bit mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    ModelCache,
    ModelConfig,
    ModelParameters,
    _dense_weights_matrix,
    _weights_matrix,
    check_compatible,
    clone_parameters,
    init_parameters,
    model_forward,
    model_forward_cached,
    param_blocks,
)
from .signals import FAULTY, HEALTHY, LABELS, Segment

FAULTY_INDEX = 1


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss; aborted rather than clipped."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 200
    validation_fraction: float = 0.2
    seed: int = 0
    patience: int = 30

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError(
                f"validation_fraction must be in (0, 1), got {self.validation_fraction}"
            )
        if self.batch_size <= 0 or self.max_epochs <= 0 or self.patience <= 0:
            raise ValueError("batch_size, max_epochs and patience must be > 0")


def encode_target(label: str, dtype=np.float64) -> np.ndarray:
    """Map a label onto the tanh output range: healthy (+1, -1), faulty (-1, +1)."""
    if label == HEALTHY:
        return np.array([1.0, -1.0], dtype=dtype)
    if label == FAULTY:
        return np.array([-1.0, 1.0], dtype=dtype)
    raise ValueError(f"label must be one of {LABELS}, got {label!r}")


def encode_targets(labels, dtype=np.float64) -> np.ndarray:
    return np.stack([encode_target(l, dtype) for l in labels])


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean of squared differences over every output element and batch item."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def _batch_values(batch, config: ModelConfig, dtype) -> np.ndarray:
    if isinstance(batch, np.ndarray) and batch.ndim == 2:
        x = batch
    else:
        x = np.stack([np.asarray(getattr(s, "values", s)) for s in batch])
    if x.ndim != 2 or x.shape[1] != config.input_length:
        raise ValueError(f"batch must be [n, {config.input_length}], got shape {x.shape}")
    return x.astype(dtype, copy=False)


def _dense_backward(layer, cache, g_pre):
    flat_powers = cache.powers.reshape(-1)
    d_w = np.outer(g_pre, flat_powers).reshape(
        layer.out_features, layer.q_order, layer.in_features
    ).transpose(0, 2, 1)
    d_in_q = (_dense_weights_matrix(layer).T @ g_pre).reshape(layer.q_order, layer.in_features)
    d_in = d_in_q[0].copy()
    for p in range(2, layer.q_order + 1):
        d_in += p * d_in_q[p - 1] * cache.powers[p - 2]
    return d_w, g_pre, d_in


def _conv_backward(layer, cache, g_pre):
    out_len = g_pre.shape[1]
    kernel, stride, q_order = layer.kernel_size, layer.stride, layer.q_order
    channels = layer.in_neurons

    d_bias = g_pre.sum(axis=1)
    d_w = (g_pre @ cache.cols.T).reshape(
        layer.out_neurons, q_order, channels, kernel
    ).transpose(0, 2, 3, 1)

    d_cols = (_weights_matrix(layer).T @ g_pre).reshape(q_order, channels, kernel, out_len)
    d_padded = np.zeros((q_order, channels, cache.padded_len), dtype=g_pre.dtype)
    span = (out_len - 1) * stride + 1
    for r in range(kernel):
        d_padded[:, :, r:r + span:stride] += d_cols[:, :, r, :]
    d_powers = d_padded[:, :, cache.pad_left:cache.pad_left + cache.in_len]

    d_in = d_powers[0].copy()
    for p in range(2, q_order + 1):
        d_in += p * d_powers[p - 1] * cache.powers[p - 2]
    return d_w, d_bias, d_in


def _backward_from_cache(params: ModelParameters, cache: ModelCache,
                         g_pred: np.ndarray, grads: list[np.ndarray]):
    """Accumulate one sample's gradients into the canonical block list."""
    n_conv = len(params.conv)

    act = cache.output.activated
    g_pre = g_pred * (1.0 - act * act)
    d_w, d_b, g = _dense_backward(params.output, cache.output, g_pre)
    grads[2 * n_conv + 2] += d_w
    grads[2 * n_conv + 3] += d_b

    act = cache.dense.activated
    g_pre = g * (1.0 - act * act)
    d_w, d_b, g = _dense_backward(params.dense, cache.dense, g_pre)
    grads[2 * n_conv] += d_w
    grads[2 * n_conv + 1] += d_b

    g_map = g.reshape(cache.flat_shape)
    for idx in range(n_conv - 1, -1, -1):
        conv_cache = cache.conv[idx]
        act = conv_cache.activated
        g_pre = g_map * (1.0 - act * act)
        d_w, d_b, g_map = _conv_backward(params.conv[idx], conv_cache, g_pre)
        grads[2 * idx] += d_w
        grads[2 * idx + 1] += d_b


def model_backward(params: ModelParameters, config: ModelConfig,
                   batch, targets) -> tuple[float, list[np.ndarray]]:
    """Loss and exact analytic gradients of the batch MSE for every parameter.

    Returns gradient blocks in ``param_blocks`` order.  Samples are
    processed sequentially so accumulation order is deterministic.
    """
    check_compatible(params, config)
    x = _batch_values(batch, config, params.dtype)
    t = np.asarray(targets, dtype=params.dtype)
    if t.shape != (x.shape[0], config.output_classes):
        raise ValueError(
            f"targets must be [{x.shape[0]}, {config.output_classes}], got {t.shape}"
        )

    grads = [np.zeros_like(b) for b in param_blocks(params)]
    scale = 2.0 / t.size
    total_sq = 0.0
    for b in range(x.shape[0]):
        pred, cache = model_forward_cached(params, config, x[b])
        diff = pred - t[b]
        total_sq += float((diff * diff).sum())
        _backward_from_cache(params, cache, diff * scale, grads)
    return total_sq / t.size, grads


def finite_difference_oracle(params: ModelParameters, config: ModelConfig,
                             batch, targets, h: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradient of the batch MSE, one entry at a time.

    Only meaningful in 64-bit mode; the O(h^2) truncation error would drown
    in float32 rounding.  Temporarily mutates the parameter arrays.
    """
    if params.dtype != np.float64:
        raise ValueError("finite differences require float64 parameters")
    if h <= 0:
        raise ValueError(f"h must be > 0, got {h}")
    x = _batch_values(batch, config, params.dtype)
    t = np.asarray(targets, dtype=params.dtype)

    def batch_loss():
        total = 0.0
        for b in range(x.shape[0]):
            diff = model_forward(params, config, x[b]) - t[b]
            total += float((diff * diff).sum())
        return total / t.size

    grads = []
    for block in param_blocks(params):
        grad = np.zeros_like(block)
        for idx in np.ndindex(block.shape):
            saved = block[idx]
            block[idx] = saved + h
            plus = batch_loss()
            block[idx] = saved - h
            minus = batch_loss()
            block[idx] = saved
            grad[idx] = (plus - minus) / (2.0 * h)
        grads.append(grad)
    return grads


@dataclass
class AdamState:
    """First/second moment accumulators aligned with param_blocks order."""

    first: list[np.ndarray]
    second: list[np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: ModelParameters) -> "AdamState":
        blocks = param_blocks(params)
        return cls([np.zeros_like(b) for b in blocks], [np.zeros_like(b) for b in blocks])


def adam_step(state: AdamState, params: ModelParameters, grads: list[np.ndarray],
              cfg: TrainConfig) -> tuple[ModelParameters, AdamState]:
    """One Adam update with bias-corrected moments; parameters updated in place."""
    blocks = param_blocks(params)
    if len(grads) != len(blocks):
        raise ValueError(f"expected {len(blocks)} gradient blocks, got {len(grads)}")
    t = state.step + 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for p, g, m, v in zip(blocks, grads, state.first, state.second):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= cfg.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + cfg.adam_epsilon)
    state.step = t
    return params, state


def split_train_validation(segments: list[Segment], fraction: float,
                           seed) -> tuple[list[Segment], list[Segment]]:
    """Deterministic shuffled split, stratified by label.

    The validation side gets round(fraction * n) items, allocated per label
    proportionally so class balance carries over.
    """
    n = len(segments)
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    if n < 2:
        raise ValueError(f"need at least 2 segments to split, got {n}")
    target = min(max(int(math.floor(fraction * n + 0.5)), 1), n - 1)

    by_label = {label: [i for i, s in enumerate(segments) if s.label == label]
                for label in LABELS}
    by_label = {label: idx for label, idx in by_label.items() if idx}
    val_counts = {label: int(math.floor(fraction * len(idx) + 0.5))
                  for label, idx in by_label.items()}
    while sum(val_counts.values()) > target:
        label = max(by_label, key=lambda l: val_counts[l])
        val_counts[label] -= 1
    while sum(val_counts.values()) < target:
        label = max(by_label, key=lambda l: len(by_label[l]) - val_counts[l])
        val_counts[label] += 1

    rng = np.random.default_rng(seed)
    train, val = [], []
    for label in LABELS:
        if label not in by_label:
            continue
        perm = rng.permutation(by_label[label])
        k = val_counts[label]
        val.extend(segments[i] for i in perm[:k])
        train.extend(segments[i] for i in perm[k:])
    if not train or not val:
        raise ValueError("too few segments to place at least one item on each side")
    return train, val


@dataclass
class TrainReport:
    """Per-epoch losses and which epoch's parameters were kept."""

    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    selected_epoch: int = -1
    best_val_loss: float = math.inf
    epochs_run: int = 0
    stop_reason: str = ""
    checkpoint_path: str | None = None

    def to_dict(self) -> dict:
        return {
            "train_losses": self.train_losses,
            "val_losses": self.val_losses,
            "selected_epoch": self.selected_epoch,
            "best_val_loss": self.best_val_loss,
            "epochs_run": self.epochs_run,
            "stop_reason": self.stop_reason,
            "checkpoint_path": self.checkpoint_path,
        }


def _forward_loss(params, config, x, t):
    total = 0.0
    for b in range(x.shape[0]):
        diff = model_forward(params, config, x[b]) - t[b]
        total += float((diff * diff).sum())
    return total / t.size


def train_model(dataset: list[Segment], model_config: ModelConfig,
                train_config: TrainConfig,
                dtype=np.float32) -> tuple[TrainReport, ModelParameters]:
    """Train on shuffled mini-batches, keep the best-validation-epoch weights.

    Fully deterministic for a given (seed, data, config) triple: the seed
    drives initialization, the stratified validation split and every epoch
    shuffle through independent child generators.
    """
    init_seed, split_seed, shuffle_seed = np.random.SeedSequence(train_config.seed).spawn(3)
    train_set, val_set = split_train_validation(
        dataset, train_config.validation_fraction, split_seed
    )

    params = init_parameters(model_config, init_seed, dtype=dtype)
    x_train = _batch_values(train_set, model_config, dtype)
    t_train = encode_targets([s.label for s in train_set], dtype)
    x_val = _batch_values(val_set, model_config, dtype)
    t_val = encode_targets([s.label for s in val_set], dtype)

    state = AdamState.for_params(params)
    rng = np.random.default_rng(shuffle_seed)
    report = TrainReport()
    best_params = clone_parameters(params)
    stale_epochs = 0

    for epoch in range(train_config.max_epochs):
        perm = rng.permutation(len(train_set))
        weighted = 0.0
        for start in range(0, len(perm), train_config.batch_size):
            idx = perm[start:start + train_config.batch_size]
            loss, grads = model_backward(params, model_config, x_train[idx], t_train[idx])
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"non-finite training loss at epoch {epoch}, "
                    f"batch {start // train_config.batch_size}"
                )
            adam_step(state, params, grads, train_config)
            weighted += loss * len(idx)
        report.train_losses.append(weighted / len(train_set))

        val_loss = _forward_loss(params, model_config, x_val, t_val)
        if not math.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        report.val_losses.append(val_loss)

        if val_loss < report.best_val_loss:
            report.best_val_loss = val_loss
            report.selected_epoch = epoch
            best_params = clone_parameters(params)
            stale_epochs = 0
        else:
            stale_epochs += 1

        report.epochs_run = epoch + 1
        if stale_epochs >= train_config.patience:
            report.stop_reason = f"no validation improvement for {train_config.patience} epochs"
            break
    else:
        report.stop_reason = "max_epochs reached"

    return report, best_params
