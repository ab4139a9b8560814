"""Segmentation of raw recordings into fixed windows and per-segment normalization.

Recordings are sampled at 4096 Hz and cut into non-overlapping one-second
windows of 4096 samples.  Each window is min-max scaled to [-1, 1]
independently of every other window, so segment amplitudes carry no
information about the recording's physical units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .data import ManifestEntry

SAMPLE_RATE_HZ = 4096
SEGMENT_SAMPLES = 4096

HEALTHY = "healthy"
FAULTY = "faulty"
LABELS = (HEALTHY, FAULTY)


@dataclass(frozen=True)
class Recording:
    """Raw amplitude sequence in arbitrary physical units."""

    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        if np.asarray(self.samples).ndim != 1:
            raise ValueError(
                f"samples must be a 1-D sequence, got shape {np.asarray(self.samples).shape}"
            )

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class SegmentMeta:
    """Provenance of a segment: the manifest entry it came from and its window index."""

    entry: "ManifestEntry"
    window_index: int

    def __post_init__(self):
        if self.window_index < 0:
            raise ValueError(f"window_index must be >= 0, got {self.window_index}")


@dataclass(frozen=True)
class Segment:
    """One normalized 4096-sample window with its label and provenance."""

    values: np.ndarray
    label: str
    meta: SegmentMeta | None = None

    def __post_init__(self):
        if self.values.shape != (SEGMENT_SAMPLES,):
            raise ValueError(
                f"segment must hold exactly {SEGMENT_SAMPLES} samples, got shape {self.values.shape}"
            )
        peak = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        if not np.isfinite(peak) or peak > 1.0:
            raise ValueError(f"segment values must lie in [-1, 1], peak magnitude {peak}")
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")


def segment_recording(rec: Recording, window: int = SEGMENT_SAMPLES) -> list[np.ndarray]:
    """Cut a recording into consecutive non-overlapping windows.

    Returns floor(len(rec)/window) windows; a trailing remainder shorter
    than one window is dropped so every segment is identically shaped.
    """
    if window <= 0:
        raise ValueError(f"window must be > 0, got {window}")
    samples = np.asarray(rec.samples)
    n = len(samples) // window
    return [samples[i * window:(i + 1) * window] for i in range(n)]


def normalize_segment(window: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Min-max scale one window linearly into [-1, 1].

    The window minimum maps exactly to -1 and the maximum exactly to +1.
    A constant window has zero range, so it maps to all zeros, the
    midpoint of the target interval.
    """
    w = np.asarray(window, dtype=dtype)
    lo = w.min()
    hi = w.max()
    if hi == lo:
        return np.zeros_like(w)
    return 2.0 * (w - lo) / (hi - lo) - 1.0
