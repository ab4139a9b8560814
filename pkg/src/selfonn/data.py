"""Dataset construction: manifest parsing, recording IO, splits, synthetic signals.

A manifest is a CSV file with the fixed header

    file,machine,sensor,signal,label,defect_type,defect_size_mm,rpm,load_kn,format

describing one recording per row.  Recordings are either `csv` (one decimal
amplitude per line) or `f32le` (raw little-endian 32-bit floats), always at
4096 Hz.  The synthetic generator produces shaft-harmonic signals with
optional decaying resonance bursts so the whole pipeline can be exercised
without any measurement hardware.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signals import (
    FAULTY,
    HEALTHY,
    LABELS,
    Recording,
    SAMPLE_RATE_HZ,
    Segment,
    SegmentMeta,
    normalize_segment,
    segment_recording,
)

SOUND = "sound"
VIBRATION = "vibration"
SIGNAL_KINDS = (SOUND, VIBRATION)

DEFECT_TYPES = ("none", "inner", "outer")
DEFECT_SIZE_MM_RANGE = (0.35, 2.35)

# Rig envelope per machine: allowed shaft speeds, axial loads, vibration
# sensor ids.  Sensor 0 is reserved for the (location-independent) microphone.
MACHINE_RPM = {"A": (480, 680, 1010), "B": (240, 360, 480, 700, 1020)}
MACHINE_LOAD_KN = {"A": (0.18, 0.23), "B": (0.18,)}
MACHINE_SENSORS = {"A": range(1, 6), "B": range(1, 7)}

SAMPLE_FORMATS = ("csv", "f32le")

MANIFEST_HEADER = [
    "file", "machine", "sensor", "signal", "label",
    "defect_type", "defect_size_mm", "rpm", "load_kn", "format",
]

# Defect sizes (mm) whose segments are reserved for training; the trained
# model is then tested on every larger defect it has never seen.
TRAIN_DEFECT_SIZES_MM = (0.35, 0.5)

NYQUIST_HZ = SAMPLE_RATE_HZ / 2


class ManifestError(ValueError):
    """A manifest row violates the schema or the rig envelope."""


class RecordingError(ValueError):
    """A recording file is missing, empty, or unparseable."""


class SplitError(ValueError):
    """The manifest cannot support the requested train/test split."""


@dataclass(frozen=True)
class ManifestEntry:
    file_path: str
    machine: str
    sensor_id: int
    signal_kind: str
    label: str
    defect_type: str
    defect_size_mm: float | None
    rpm: int
    load_kn: float
    sample_format: str

    def __post_init__(self):
        if self.machine not in MACHINE_RPM:
            raise ManifestError(f"unknown machine {self.machine!r}, expected A or B")
        if self.signal_kind not in SIGNAL_KINDS:
            raise ManifestError(f"unknown signal kind {self.signal_kind!r}")
        if self.signal_kind == SOUND:
            if self.sensor_id != 0:
                raise ManifestError(
                    f"sound entries use sensor 0, got sensor {self.sensor_id}"
                )
        elif self.sensor_id not in MACHINE_SENSORS[self.machine]:
            allowed = MACHINE_SENSORS[self.machine]
            raise ManifestError(
                f"machine {self.machine} vibration sensors are "
                f"{allowed.start}..{allowed.stop - 1}, got {self.sensor_id}"
            )
        if self.label not in LABELS:
            raise ManifestError(f"unknown label {self.label!r}, expected one of {LABELS}")
        if self.defect_type not in DEFECT_TYPES:
            raise ManifestError(f"unknown defect type {self.defect_type!r}")
        if self.label == HEALTHY:
            if self.defect_type != "none" or self.defect_size_mm is not None:
                raise ManifestError("healthy rows must have defect_type none and no size")
        else:
            if self.defect_type == "none":
                raise ManifestError("faulty rows need defect_type inner or outer")
            if self.defect_size_mm is None:
                raise ManifestError("faulty rows need a defect size")
            lo, hi = DEFECT_SIZE_MM_RANGE
            if not lo <= self.defect_size_mm <= hi:
                raise ManifestError(
                    f"defect size {self.defect_size_mm} mm outside [{lo}, {hi}]"
                )
        if self.rpm not in MACHINE_RPM[self.machine]:
            raise ManifestError(
                f"machine {self.machine} speeds are {MACHINE_RPM[self.machine]}, "
                f"got {self.rpm}"
            )
        if not any(math.isclose(self.load_kn, l) for l in MACHINE_LOAD_KN[self.machine]):
            raise ManifestError(
                f"machine {self.machine} loads are {MACHINE_LOAD_KN[self.machine]} kN, "
                f"got {self.load_kn}"
            )
        if self.sample_format not in SAMPLE_FORMATS:
            raise ManifestError(f"unknown sample format {self.sample_format!r}")


def _parse_row(row: dict, line_no: int) -> ManifestEntry:
    def bad(msg):
        return ManifestError(f"manifest line {line_no}: {msg}")

    try:
        size_text = (row["defect_size_mm"] or "").strip()
        return ManifestEntry(
            file_path=row["file"].strip(),
            machine=row["machine"].strip(),
            sensor_id=int(row["sensor"]),
            signal_kind=row["signal"].strip(),
            label=row["label"].strip(),
            defect_type=row["defect_type"].strip(),
            defect_size_mm=float(size_text) if size_text else None,
            rpm=int(row["rpm"]),
            load_kn=float(row["load_kn"]),
            sample_format=row["format"].strip(),
        )
    except ManifestError as exc:
        raise bad(exc.args[0]) from None
    except (KeyError, TypeError) as exc:
        raise bad(f"missing field {exc}") from None
    except ValueError as exc:
        raise bad(f"malformed number: {exc}") from None


def parse_manifest(path) -> list[ManifestEntry]:
    """Read and validate a manifest CSV; errors carry 1-based line numbers."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_HEADER:
            raise ManifestError(
                f"manifest header must be {','.join(MANIFEST_HEADER)!r}, "
                f"got {','.join(reader.fieldnames or ())!r}"
            )
        entries = [_parse_row(row, line_no) for line_no, row in enumerate(reader, start=2)]
    if not entries:
        raise ManifestError(f"manifest has no data rows: {path}")
    return entries


def read_recording_file(path, sample_format: str) -> Recording:
    """Load a recording file: csv (one amplitude per line) or raw f32le."""
    path = Path(path)
    if sample_format not in SAMPLE_FORMATS:
        raise RecordingError(f"unknown sample format {sample_format!r}")
    if not path.is_file():
        raise RecordingError(f"recording not found: {path}")
    if sample_format == "csv":
        samples = []
        with open(path) as fh:
            for line_no, line in enumerate(fh, start=1):
                text = line.strip()
                if not text:
                    continue
                try:
                    samples.append(float(text))
                except ValueError:
                    raise RecordingError(
                        f"{path} line {line_no}: not a number: {text!r}"
                    ) from None
        if not samples:
            raise RecordingError(f"empty recording: {path}")
        return Recording(np.asarray(samples, dtype=np.float64))
    raw = path.read_bytes()
    if not raw:
        raise RecordingError(f"empty recording: {path}")
    if len(raw) % 4:
        raise RecordingError(f"{path}: f32le size {len(raw)} is not a multiple of 4")
    return Recording(np.frombuffer(raw, dtype="<f4").copy())


def load_recording(entry: ManifestEntry, base_dir=None) -> Recording:
    """Load one recording file in the format the manifest declares for it."""
    path = Path(base_dir) / entry.file_path if base_dir else Path(entry.file_path)
    return read_recording_file(path, entry.sample_format)


def write_recording_f32le(samples: np.ndarray, path):
    Path(path).write_bytes(np.asarray(samples, dtype="<f4").tobytes())


def write_recording_csv(samples: np.ndarray, path):
    with open(path, "w") as fh:
        for value in np.asarray(samples, dtype=np.float64).tolist():
            fh.write(f"{value!r}\n")


def write_manifest(entries: list[ManifestEntry], path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for e in entries:
            size = "" if e.defect_size_mm is None else f"{e.defect_size_mm:g}"
            writer.writerow([
                e.file_path, e.machine, e.sensor_id, e.signal_kind, e.label,
                e.defect_type, size, e.rpm, f"{e.load_kn:g}", e.sample_format,
            ])


def segments_for_entry(entry: ManifestEntry, base_dir=None,
                       dtype=np.float32) -> list[Segment]:
    rec = load_recording(entry, base_dir)
    windows = segment_recording(rec)
    if not windows:
        raise RecordingError(
            f"{entry.file_path}: too short to cut a single window "
            f"({rec.samples.size} samples)"
        )
    return [
        Segment(normalize_segment(w, dtype=dtype), entry.label, SegmentMeta(entry, i))
        for i, w in enumerate(windows)
    ]


def build_dataset(entries: list[ManifestEntry], base_dir=None, dtype=np.float32,
                  max_workers=None) -> list[Segment]:
    """Load, window and normalize every manifest entry.

    Files are read concurrently but results are concatenated in manifest
    order, so the segment list is deterministic.
    """
    if not entries:
        return []
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        per_entry = list(pool.map(
            lambda e: segments_for_entry(e, base_dir=base_dir, dtype=dtype), entries
        ))
    return [seg for group in per_entry for seg in group]


def _is_reference_sensor(entry: ManifestEntry) -> bool:
    # The split trains on one fixed observation point: vibration sensor 1,
    # or the single microphone for sound runs.
    return entry.signal_kind == SOUND or entry.sensor_id == 1


def _is_train_size(entry: ManifestEntry) -> bool:
    return entry.defect_size_mm is not None and any(
        math.isclose(entry.defect_size_mm, s) for s in TRAIN_DEFECT_SIZES_MM
    )


def build_small_defect_split(entries: list[ManifestEntry], machine: str,
                             signal_kind: str | None = None, seed=0,
                             base_dir=None, dtype=np.float32,
                             cap_fault_segments: int | None = None,
                             max_workers=None) -> tuple[list[Segment], list[Segment]]:
    """Train on the two smallest defect sizes seen by the reference sensor.

    Train = every reference-sensor fault segment with defect size 0.35 or
    0.5 mm plus an equal number of reference-sensor healthy segments,
    sampled deterministically by `seed`.  Test = every other segment, so
    the test side contains only defect sizes (and sensors) the model never
    trained on.  `cap_fault_segments` optionally subsamples the fault side
    to a fixed count before balancing.
    """
    if machine not in MACHINE_RPM:
        raise SplitError(f"unknown machine {machine!r}, expected A or B")
    chosen = [e for e in entries
              if e.machine == machine
              and (signal_kind is None or e.signal_kind == signal_kind)]
    if not chosen:
        raise SplitError(
            f"no manifest entries for machine {machine}"
            + (f" with signal {signal_kind}" if signal_kind else "")
        )

    segments = build_dataset(chosen, base_dir=base_dir, dtype=dtype,
                             max_workers=max_workers)
    fault_idx = [i for i, s in enumerate(segments)
                 if s.label == FAULTY and _is_reference_sensor(s.meta.entry)
                 and _is_train_size(s.meta.entry)]
    healthy_idx = [i for i, s in enumerate(segments)
                   if s.label == HEALTHY and _is_reference_sensor(s.meta.entry)]

    missing = []
    if not fault_idx:
        missing.append(
            "faulty reference-sensor recordings with defect size "
            f"in {TRAIN_DEFECT_SIZES_MM} mm"
        )
    if not healthy_idx:
        missing.append("healthy reference-sensor recordings")
    if missing:
        raise SplitError(f"split needs {' and '.join(missing)} for machine {machine}")

    rng = np.random.default_rng(seed)
    if cap_fault_segments is not None:
        if cap_fault_segments < 1:
            raise SplitError(f"cap_fault_segments must be >= 1, got {cap_fault_segments}")
        if cap_fault_segments < len(fault_idx):
            pick = rng.choice(len(fault_idx), size=cap_fault_segments, replace=False)
            fault_idx = [fault_idx[i] for i in np.sort(pick)]
    if len(healthy_idx) < len(fault_idx):
        raise SplitError(
            f"need {len(fault_idx)} healthy reference-sensor segments to balance "
            f"the train set, found only {len(healthy_idx)}"
        )
    pick = rng.choice(len(healthy_idx), size=len(fault_idx), replace=False)
    healthy_train = [healthy_idx[i] for i in np.sort(pick)]

    train_ids = set(fault_idx) | set(healthy_train)
    train = [segments[i] for i in fault_idx] + [segments[i] for i in healthy_train]
    test = [s for i, s in enumerate(segments) if i not in train_ids]
    return train, test


@dataclass(frozen=True)
class DefectConfig:
    """Periodic decaying-resonance bursts, the classical bearing-fault signature."""

    impulse_rate_hz: float = 8.0
    impulse_amplitude: float = 1.2
    decay_per_s: float = 400.0
    resonance_hz: float = 950.0

    def __post_init__(self):
        if not 0 < self.impulse_rate_hz < NYQUIST_HZ:
            raise ValueError(f"impulse rate must be in (0, {NYQUIST_HZ}) Hz")
        if not 0 < self.resonance_hz < NYQUIST_HZ:
            raise ValueError(f"resonance must be in (0, {NYQUIST_HZ}) Hz")
        if self.decay_per_s <= 0 or self.impulse_amplitude <= 0:
            raise ValueError("impulse amplitude and decay must be > 0")


@dataclass(frozen=True)
class SynthConfig:
    """One synthetic recording.

    Healthy content is Gaussian noise, shaft-frequency harmonics and an
    optional continuous interference tone (think gear mesh or electrical
    hum).  The tone shares the defect resonance band on purpose: it fools
    band-energy thresholds but not a waveform-shape classifier, keeping
    the baseline detector honest without making the task unlearnable.
    """

    seed: int = 0
    duration_s: float = 10.0
    rpm: int = 480
    defect: DefectConfig | None = None
    noise_rms: float = 0.1
    shaft_harmonic_amplitudes: tuple[float, ...] = (0.5, 0.25, 0.125)
    tone_hz: float = 950.0
    tone_amplitude: float = 0.0

    def __post_init__(self):
        if self.duration_s < 1:
            raise ValueError(f"duration must be >= 1 s, got {self.duration_s}")
        if self.rpm <= 0:
            raise ValueError(f"rpm must be > 0, got {self.rpm}")
        if self.noise_rms < 0 or self.tone_amplitude < 0:
            raise ValueError("noise_rms and tone_amplitude must be >= 0")
        if not 0 < self.tone_hz < NYQUIST_HZ:
            raise ValueError(f"tone must be in (0, {NYQUIST_HZ}) Hz, got {self.tone_hz}")
        top = self.rpm / 60.0 * max(len(self.shaft_harmonic_amplitudes), 1)
        if top >= NYQUIST_HZ:
            raise ValueError(
                f"highest shaft harmonic {top:.0f} Hz reaches Nyquist ({NYQUIST_HZ} Hz)"
            )


def generate_synthetic_recording(cfg: SynthConfig) -> tuple[Recording, str]:
    """Deterministic synthetic bearing signal; label follows cfg.defect.

    Healthy is Gaussian noise plus shaft-frequency harmonics.  A defect adds
    exponentially decaying resonance bursts at impulse_rate_hz, each start
    time jittered by up to 2% of the impulse interval.
    """
    rng = np.random.default_rng(cfg.seed)
    n = int(round(cfg.duration_s * SAMPLE_RATE_HZ))
    t = np.arange(n) / SAMPLE_RATE_HZ

    x = rng.normal(0.0, cfg.noise_rms, n) if cfg.noise_rms > 0 else np.zeros(n)
    shaft_hz = cfg.rpm / 60.0
    for k, amp in enumerate(cfg.shaft_harmonic_amplitudes, start=1):
        if amp:
            x += amp * np.sin(2.0 * np.pi * k * shaft_hz * t)
    if cfg.tone_amplitude > 0:
        phase = rng.uniform(0.0, 2.0 * np.pi)
        x += cfg.tone_amplitude * np.sin(2.0 * np.pi * cfg.tone_hz * t + phase)

    if cfg.defect is None:
        return Recording(x), HEALTHY

    d = cfg.defect
    interval = 1.0 / d.impulse_rate_hz
    n_bursts = int(round(d.impulse_rate_hz * cfg.duration_s))
    # burst long enough for the envelope to fall below 1e-4 of its peak
    burst_len = int(math.ceil(math.log(1e4) / d.decay_per_s * SAMPLE_RATE_HZ))
    for i in range(n_bursts):
        start_s = (i + 0.5) * interval + rng.uniform(-0.02, 0.02) * interval
        first = int(math.ceil(start_s * SAMPLE_RATE_HZ))
        last = min(first + burst_len, n)
        if first >= n:
            break
        tau = t[first:last] - start_s
        x[first:last] += d.impulse_amplitude * np.exp(-d.decay_per_s * tau) * np.sin(
            2.0 * np.pi * d.resonance_hz * tau
        )
    return Recording(x), FAULTY


def _synth_entry(label: str, index: int, cfg: SynthConfig,
                 sample_format: str = "f32le") -> ManifestEntry:
    faulty = label == FAULTY
    sizes = TRAIN_DEFECT_SIZES_MM
    return ManifestEntry(
        file_path=f"{label}_{index:03d}.{sample_format}",
        machine="A",
        sensor_id=1,
        signal_kind=VIBRATION,
        label=label,
        defect_type="outer" if faulty else "none",
        defect_size_mm=sizes[index % len(sizes)] if faulty else None,
        rpm=cfg.rpm,
        load_kn=0.18,
        sample_format=sample_format,
    )


def _synth_configs(n_healthy: int, n_faulty: int, duration_s: float, seed,
                   rpm: int, noise_rms: float, defect: DefectConfig,
                   tone_hz: float, tone_max: float) -> list[tuple[str, int, SynthConfig]]:
    """Per-recording configs: seeded noise plus a per-recording tone level.

    Tone amplitude is drawn uniformly from [0, tone_max] for both classes,
    so high-band energy alone cannot fully separate them.
    """
    if n_healthy < 1 or n_faulty < 1:
        raise ValueError("need at least one recording per class")
    if tone_max < 0:
        raise ValueError(f"tone_max must be >= 0, got {tone_max}")
    total = n_healthy + n_faulty
    words = np.random.SeedSequence(seed).generate_state(2 * total)
    configs = []
    for label, count, offset in ((HEALTHY, n_healthy, 0), (FAULTY, n_faulty, n_healthy)):
        for i in range(count):
            j = offset + i
            configs.append((label, i, SynthConfig(
                seed=int(words[j]), duration_s=duration_s, rpm=rpm,
                noise_rms=noise_rms, defect=defect if label == FAULTY else None,
                tone_hz=tone_hz,
                tone_amplitude=tone_max * float(words[total + j]) / 2.0 ** 32,
            )))
    return configs


def build_synthetic_dataset(n_healthy: int = 20, n_faulty: int = 20,
                            duration_s: float = 10.0, seed=0, rpm: int = 480,
                            noise_rms: float = 0.1,
                            defect: DefectConfig | None = None,
                            tone_hz: float = 950.0, tone_max: float = 0.12,
                            dtype=np.float32) -> list[Segment]:
    """Generate a balanced in-memory corpus and cut it into labeled segments."""
    segments = []
    for label, i, cfg in _synth_configs(n_healthy, n_faulty, duration_s, seed,
                                        rpm, noise_rms, defect or DefectConfig(),
                                        tone_hz, tone_max):
        rec, got_label = generate_synthetic_recording(cfg)
        entry = _synth_entry(got_label, i, cfg)
        segments.extend(
            Segment(normalize_segment(w, dtype=dtype), got_label, SegmentMeta(entry, j))
            for j, w in enumerate(segment_recording(rec))
        )
    return segments


def write_synth_corpus(out_dir, n_healthy: int = 20, n_faulty: int = 20,
                       duration_s: float = 10.0, seed=0, rpm: int = 480,
                       noise_rms: float = 0.1, defect: DefectConfig | None = None,
                       tone_hz: float = 950.0, tone_max: float = 0.12,
                       sample_format: str = "f32le"):
    """Write a synthetic corpus to disk: one file per recording plus manifest.csv."""
    if sample_format not in SAMPLE_FORMATS:
        raise ValueError(f"unknown sample format {sample_format!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for label, i, cfg in _synth_configs(n_healthy, n_faulty, duration_s, seed,
                                        rpm, noise_rms, defect or DefectConfig(),
                                        tone_hz, tone_max):
        rec, got_label = generate_synthetic_recording(cfg)
        entry = _synth_entry(got_label, i, cfg, sample_format)
        if sample_format == "csv":
            write_recording_csv(rec.samples, out_dir / entry.file_path)
        else:
            write_recording_f32le(rec.samples, out_dir / entry.file_path)
        entries.append(entry)
    manifest_path = out_dir / "manifest.csv"
    write_manifest(entries, manifest_path)
    return manifest_path


DEFAULT_SYNTH_SPEC = {
    "n_healthy": 20,
    "n_faulty": 20,
    "duration_s": 10.0,
    "rpm": 480,
    "noise_rms": 0.1,
    "tone_hz": 950.0,
    "tone_max": 0.12,
    "defect": {
        "impulse_rate_hz": 8.0,
        "impulse_amplitude": 1.2,
        "decay_per_s": 400.0,
        "resonance_hz": 950.0,
    },
}


def resolve_synth_spec(source: str) -> dict:
    """Turn a --synth argument ("default" or a JSON file path) into kwargs."""
    if source == "default":
        spec = json.loads(json.dumps(DEFAULT_SYNTH_SPEC))
    else:
        path = Path(source)
        if not path.is_file():
            raise ValueError(f"synth spec not found: {path}")
        spec = json.loads(path.read_text())
        unknown = set(spec) - set(DEFAULT_SYNTH_SPEC)
        if unknown:
            raise ValueError(f"unknown synth spec keys: {sorted(unknown)}")
    defect = spec.pop("defect", None)
    if defect is not None:
        defect = DefectConfig(**defect)
    spec["defect"] = defect
    return spec


BURST_BAND_LOW_HZ = 600.0


def band_energy_ratio(values: np.ndarray, band_low_hz: float = BURST_BAND_LOW_HZ,
                      sample_rate_hz: int = SAMPLE_RATE_HZ) -> float:
    """RMS fraction of signal energy above band_low_hz, ignoring the DC bin.

    Invariant under the affine rescaling done by segment normalization, so
    it reads the same on raw and normalized windows.
    """
    values = np.asarray(values, dtype=np.float64)
    power = np.abs(np.fft.rfft(values)) ** 2
    freqs = np.fft.rfftfreq(values.size, 1.0 / sample_rate_hz)
    total = float(power[1:].sum())
    if total == 0.0:
        return 0.0
    band = float(power[freqs >= band_low_hz].sum())
    return math.sqrt(band / total)


@dataclass(frozen=True)
class EnergyRatioDetector:
    """Threshold on band_energy_ratio; the no-learning baseline detector."""

    threshold: float
    band_low_hz: float = BURST_BAND_LOW_HZ

    @classmethod
    def fit(cls, segments: list[Segment],
            band_low_hz: float = BURST_BAND_LOW_HZ) -> "EnergyRatioDetector":
        """Pick the threshold that maximizes training accuracy.

        Bursts add high-frequency energy, so faulty is always the
        high-ratio side; candidates are midpoints between adjacent sorted
        ratios (plus open ends).
        """
        if not segments:
            raise ValueError("cannot fit a detector on an empty segment list")
        ratios = np.array([band_energy_ratio(s.values, band_low_hz) for s in segments])
        faulty = np.array([s.label == FAULTY for s in segments])
        order = np.argsort(ratios)
        sorted_ratios = ratios[order]
        candidates = [sorted_ratios[0] - 1.0]
        candidates += [0.5 * (a + b) for a, b in zip(sorted_ratios, sorted_ratios[1:])]
        candidates.append(sorted_ratios[-1] + 1.0)
        best_t, best_acc = candidates[0], -1.0
        for cand in candidates:
            acc = float(((ratios > cand) == faulty).mean())
            if acc > best_acc:
                best_t, best_acc = cand, acc
        return cls(float(best_t), band_low_hz)

    def classify(self, segment: Segment | np.ndarray) -> str:
        values = segment.values if isinstance(segment, Segment) else segment
        ratio = band_energy_ratio(values, self.band_low_hz)
        return FAULTY if ratio > self.threshold else HEALTHY

    def accuracy(self, segments: list[Segment]) -> float:
        if not segments:
            raise ValueError("cannot score an empty segment list")
        hits = sum(self.classify(s) == s.label for s in segments)
        return hits / len(segments)
