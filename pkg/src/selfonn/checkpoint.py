"""Versioned binary checkpoint format for model parameters.

Layout, all little-endian:

    magic   4 bytes  b"SONN"
    version u16      currently 1
    mode    u8       bytes per real: 4 (float32) or 8 (float64)
    config  u32 each input_length, n_op_layers,
                     (out_neurons, kernel_size, stride) per layer,
                     q_order, dense_width, output_classes
    blocks  raw reals, mode-sized, in layer order; per conv layer the
            weights in [out][in][tap][order] index order then the biases,
            then dense weights [out][in][order] + biases, then the output
            layer the same way
    crc     u32      CRC-32 of every preceding byte

Loading rebuilds (parameters, config) bit-identically.  Malformed files
raise a distinct error per failure mode instead of returning a partial
model.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .model import (
    GenerativeDenseLayer,
    ModelConfig,
    ModelParameters,
    OperationalConvLayer,
    OpLayerSpec,
    check_compatible,
    flatten_width,
    param_blocks,
)

MAGIC = b"SONN"
FORMAT_VERSION = 1

_MODE_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


class CheckpointError(Exception):
    """Base class for malformed or incompatible checkpoint files."""


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


class ChecksumError(CheckpointError):
    pass


def _mode_byte(dtype) -> int:
    size = np.dtype(dtype).itemsize
    if size not in _MODE_DTYPES:
        raise ValueError(f"unsupported parameter dtype {dtype}")
    return size


def save_checkpoint(params: ModelParameters, config: ModelConfig, path):
    """Serialize parameters plus their config; round-trips bit-identically."""
    check_compatible(params, config)
    mode = _mode_byte(params.dtype)
    dtype = _MODE_DTYPES[mode]

    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<HB", FORMAT_VERSION, mode)

    counts = [config.input_length, len(config.op_layers)]
    for spec in config.op_layers:
        counts += [spec.out_neurons, spec.kernel_size, spec.stride]
    counts += [config.q_order, config.dense_width, config.output_classes]
    buf += struct.pack(f"<{len(counts)}I", *counts)

    for block in param_blocks(params):
        buf += np.ascontiguousarray(block, dtype=dtype).tobytes()

    buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(buf)


def _take(raw: bytes, offset: int, count: int, what: str) -> tuple[bytes, int]:
    if offset + count > len(raw):
        raise TruncatedCheckpointError(f"file ends inside {what}")
    return raw[offset:offset + count], offset + count


def load_checkpoint(path) -> tuple[ModelParameters, ModelConfig]:
    with open(path, "rb") as fh:
        raw = fh.read()

    chunk, offset = _take(raw, 0, 4, "magic")
    if chunk != MAGIC:
        raise BadMagicError(f"bad magic {chunk!r}, expected {MAGIC!r}")
    chunk, offset = _take(raw, offset, 3, "header")
    version, mode = struct.unpack("<HB", chunk)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"format version {version}, expected {FORMAT_VERSION}")
    if mode not in _MODE_DTYPES:
        raise VersionMismatchError(f"unknown numeric mode byte {mode}")
    dtype = _MODE_DTYPES[mode]

    def take_u32s(n, what, off):
        chunk, off = _take(raw, off, 4 * n, what)
        return struct.unpack(f"<{n}I", chunk), off

    (input_length, n_layers), offset = take_u32s(2, "config block", offset)
    if n_layers == 0 or n_layers > 4096:
        raise ShapeMismatchError(f"implausible operational layer count {n_layers}")
    specs = []
    for _ in range(n_layers):
        (out, kernel, stride), offset = take_u32s(3, "config block", offset)
        specs.append(OpLayerSpec(out, kernel, stride))
    (q_order, dense_width, output_classes), offset = take_u32s(3, "config block", offset)
    try:
        config = ModelConfig(input_length, tuple(specs), q_order, dense_width, output_classes)
    except ValueError as exc:
        raise ShapeMismatchError(f"config block invalid: {exc}") from exc

    shapes = []
    in_neurons = 1
    for spec in config.op_layers:
        shapes.append((spec.out_neurons, in_neurons, spec.kernel_size, q_order))
        shapes.append((spec.out_neurons,))
        in_neurons = spec.out_neurons
    shapes.append((dense_width, flatten_width(config), q_order))
    shapes.append((dense_width,))
    shapes.append((output_classes, dense_width, q_order))
    shapes.append((output_classes,))

    payload_bytes = sum(int(np.prod(s)) for s in shapes) * mode
    expected_size = offset + payload_bytes + 4
    if len(raw) < expected_size:
        raise TruncatedCheckpointError(
            f"file is {len(raw)} bytes, config implies {expected_size}"
        )
    if len(raw) > expected_size:
        raise ShapeMismatchError(
            f"file is {len(raw)} bytes, {len(raw) - expected_size} more than the config implies"
        )

    (stored_crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError("payload checksum mismatch")

    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        chunk, offset = _take(raw, offset, count * mode, "weight block")
        arrays.append(np.frombuffer(chunk, dtype=dtype).reshape(shape).copy())

    conv = []
    for spec in config.op_layers:
        w, b = arrays.pop(0), arrays.pop(0)
        conv.append(OperationalConvLayer(w, b, spec.stride))
    dense = GenerativeDenseLayer(arrays.pop(0), arrays.pop(0))
    output = GenerativeDenseLayer(arrays.pop(0), arrays.pop(0))
    params = ModelParameters(conv, dense, output)
    check_compatible(params, config)
    return params, config


def stored_checksum(path) -> int:
    """The CRC-32 recorded at the end of a checkpoint file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise TruncatedCheckpointError("file shorter than a checksum")
    return struct.unpack("<I", raw[-4:])[0]
