"""Segment classification, confusion metrics, per-sensor reports, latency bench.

"Faulty" is the positive class throughout, and exact output ties classify
as faulty: in condition monitoring a false alarm costs an inspection, a
missed fault costs the machine.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .model import ModelConfig, ModelParameters, model_forward
from .signals import FAULTY, HEALTHY, Segment
from .training import FAULTY_INDEX

ZERO_DENOMINATOR_NOTE = (
    "positive class = faulty; with an empty precision/recall denominator the "
    "metric is 1.0 if the other error count is also zero, else 0.0; F1 = 0 "
    "when P + R = 0"
)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


@dataclass(frozen=True)
class MetricsReport:
    counts: ConfusionCounts
    precision: float
    recall: float
    f1: float
    accuracy: float
    machine: str | None = None
    signal_kind: str | None = None
    sensor_id: int | None = None

    def to_dict(self) -> dict:
        return {
            "machine": self.machine,
            "signal": self.signal_kind,
            "sensor": self.sensor_id,
            "segments": self.counts.total,
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "fn": self.counts.fn,
            "tn": self.counts.tn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
        }


def classify_segment(outputs: np.ndarray) -> str:
    """Label from the two output activations; index 1 is the faulty unit."""
    outputs = np.asarray(outputs)
    if outputs.shape != (2,):
        raise ValueError(f"expected 2 output activations, got shape {outputs.shape}")
    if not np.all(np.isfinite(outputs)):
        raise ValueError(f"non-finite network outputs: {outputs}")
    return FAULTY if outputs[FAULTY_INDEX] >= outputs[1 - FAULTY_INDEX] else HEALTHY


def accumulate_confusion(predictions, truths) -> ConfusionCounts:
    if len(predictions) != len(truths):
        raise ValueError(
            f"{len(predictions)} predictions vs {len(truths)} truth labels"
        )
    tp = fp = fn = tn = 0
    for pred, truth in zip(predictions, truths):
        if truth == FAULTY:
            if pred == FAULTY:
                tp += 1
            else:
                fn += 1
        else:
            if pred == FAULTY:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def compute_metrics(counts: ConfusionCounts, machine=None, signal_kind=None,
                    sensor_id=None) -> MetricsReport:
    """Precision/recall/F1/accuracy over one confusion table."""
    if counts.total == 0:
        raise ValueError("cannot compute metrics over zero segments")
    if counts.tp + counts.fp > 0:
        precision = counts.tp / (counts.tp + counts.fp)
    else:
        precision = 1.0 if counts.fn == 0 else 0.0
    if counts.tp + counts.fn > 0:
        recall = counts.tp / (counts.tp + counts.fn)
    else:
        recall = 1.0 if counts.fp == 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    accuracy = (counts.tp + counts.tn) / counts.total
    return MetricsReport(counts, precision, recall, f1, accuracy,
                         machine, signal_kind, sensor_id)


def predict_labels(params: ModelParameters, config: ModelConfig,
                   segments: list[Segment], max_workers=None) -> list[str]:
    """Classify every segment; forward passes run in parallel, order kept."""
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        outputs = list(pool.map(lambda s: model_forward(params, config, s), segments))
    return [classify_segment(out) for out in outputs]


def _group_key(segment: Segment):
    entry = segment.meta.entry if segment.meta else None
    if entry is None:
        return (None, None, None)
    # one pooled row per machine for sound, one row per sensor for vibration
    sensor = None if entry.signal_kind == "sound" else entry.sensor_id
    return (entry.machine, entry.signal_kind, sensor)


def report_by_group(segments: list[Segment], predictions: list[str]) -> list[MetricsReport]:
    """One MetricsReport per (machine, signal kind, sensor) present in the data."""
    if len(segments) != len(predictions):
        raise ValueError(f"{len(segments)} segments vs {len(predictions)} predictions")
    grouped: dict[tuple, list[int]] = {}
    for i, seg in enumerate(segments):
        grouped.setdefault(_group_key(seg), []).append(i)
    reports = []
    order = sorted(grouped, key=lambda k: (
        k[0] or "", k[1] or "", -1 if k[2] is None else k[2]
    ))
    for key in order:
        idx = grouped[key]
        counts = accumulate_confusion(
            [predictions[i] for i in idx], [segments[i].label for i in idx]
        )
        reports.append(compute_metrics(counts, *key))
    return reports


def _percent(x: float) -> str:
    return f"{100.0 * x:.2f}"


def render_metrics_table(reports: list[MetricsReport]) -> str:
    """Aligned text table, metrics as percentages with two decimals."""
    header = ["machine", "signal", "sensor", "segments",
              "acc%", "p%", "r%", "f1%"]
    rows = []
    for r in reports:
        rows.append([
            r.machine or "-",
            r.signal_kind or "-",
            "all" if r.sensor_id is None else str(r.sensor_id),
            str(r.counts.total),
            _percent(r.accuracy), _percent(r.precision),
            _percent(r.recall), _percent(r.f1),
        ])
    widths = [max(len(header[c]), *(len(row[c]) for row in rows)) if rows else len(header[c])
              for c in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    lines.append(f"note: {ZERO_DENOMINATOR_NOTE}")
    return "\n".join(lines)


def reports_to_json(reports: list[MetricsReport], extra: dict | None = None) -> str:
    payload = {"groups": [r.to_dict() for r in reports], "note": ZERO_DENOMINATOR_NOTE}
    if extra:
        payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True)


def write_reports_csv(reports: list[MetricsReport], path):
    fields = ["machine", "signal", "sensor", "segments", "tp", "fp", "fn", "tn",
              "precision", "recall", "f1", "accuracy"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for r in reports:
            writer.writerow(r.to_dict())


@dataclass(frozen=True)
class BenchStats:
    mean_ms: float
    median_ms: float
    p95_ms: float
    real_time_factor: float
    n_timings: int

    def to_dict(self) -> dict:
        return {
            "mean_ms": self.mean_ms,
            "median_ms": self.median_ms,
            "p95_ms": self.p95_ms,
            "real_time_factor": self.real_time_factor,
            "n_timings": self.n_timings,
        }


def bench_forward(params: ModelParameters, config: ModelConfig,
                  n_segments: int = 100, repetitions: int = 1,
                  seed=0) -> BenchStats:
    """Single-threaded wall-clock latency per 1-second segment.

    Times n_segments random segments, repetitions times each; the real-time
    factor is the 1000 ms segment budget divided by the mean latency.
    """
    if n_segments < 1 or repetitions < 1:
        raise ValueError("n_segments and repetitions must be >= 1")
    rng = np.random.default_rng(seed)
    batch = rng.uniform(-1.0, 1.0, (n_segments, config.input_length)).astype(params.dtype)

    timings = []
    with threadpool_limits(limits=1):
        for i in range(min(2, n_segments)):
            model_forward(params, config, batch[i])    # warm-up, untimed
        for _ in range(repetitions):
            for i in range(n_segments):
                start = time.perf_counter()
                model_forward(params, config, batch[i])
                timings.append((time.perf_counter() - start) * 1000.0)

    arr = np.asarray(timings)
    mean_ms = float(arr.mean())
    return BenchStats(
        mean_ms=mean_ms,
        median_ms=float(np.median(arr)),
        p95_ms=float(np.percentile(arr, 95)),
        real_time_factor=math.inf if mean_ms == 0 else 1000.0 / mean_ms,
        n_timings=arr.size,
    )
