"""Command-line front end: train, evaluate, infer, synth, bench, inspect.

Configuration comes from built-in defaults, then an optional JSON config
file (--config), then individual flags, later sources winning.  The fully
resolved configuration is echoed into every JSON artifact so a run can be
reproduced from its own output.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
divergence during training.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint, stored_checksum
from .data import (
    ManifestError,
    RecordingError,
    SplitError,
    build_dataset,
    build_small_defect_split,
    build_synthetic_dataset,
    parse_manifest,
    read_recording_file,
    resolve_synth_spec,
    write_synth_corpus,
)
from .evaluation import (
    accumulate_confusion,
    bench_forward,
    classify_segment,
    compute_metrics,
    predict_labels,
    render_metrics_table,
    report_by_group,
    reports_to_json,
    write_reports_csv,
)
from .model import (
    DEFAULT_OP_LAYERS,
    ModelConfig,
    OpLayerSpec,
    init_parameters,
    model_forward,
    param_count,
)
from .signals import normalize_segment, segment_recording
from .training import DivergenceError, TrainConfig, split_train_validation, train_model


class ConfigError(ValueError):
    """Bad flag combination, config file, or checkpoint/config mismatch."""


MODEL_KEYS = ("input_length", "op_layers", "q_order", "dense_width", "output_classes")


@dataclass
class RunConfig:
    """Resolved model + training + run settings for one command invocation."""

    input_length: int = 4096
    op_layers: list = field(
        default_factory=lambda: [list(spec) for spec in DEFAULT_OP_LAYERS]
    )
    q_order: int = 3
    dense_width: int = 32
    output_classes: int = 2
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 200
    validation_fraction: float = 0.2
    patience: int = 30
    seed: int = 0
    f64: bool = False
    threads: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def dtype(self):
        return np.float64 if self.f64 else np.float32

    def model_config(self) -> ModelConfig:
        try:
            layers = tuple(OpLayerSpec(*map(int, spec)) for spec in self.op_layers)
            return ModelConfig(
                input_length=self.input_length, op_layers=layers,
                q_order=self.q_order, dense_width=self.dense_width,
                output_classes=self.output_classes,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad model configuration: {exc}") from None

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(
                learning_rate=self.learning_rate, adam_beta1=self.adam_beta1,
                adam_beta2=self.adam_beta2, adam_epsilon=self.adam_epsilon,
                batch_size=self.batch_size, max_epochs=self.max_epochs,
                validation_fraction=self.validation_fraction,
                seed=self.seed, patience=self.patience,
            )
        except ValueError as exc:
            raise ConfigError(f"bad training configuration: {exc}") from None


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from None
    if not values:
        raise ConfigError(f"{flag} got an empty list")
    return values


def _resolve_op_layers(base: list, neurons, kernels, strides) -> list:
    """Merge --neurons/--kernels/--strides over the base layer table.

    Depth follows the longest explicit list; unspecified pieces fall back
    to the base table, repeating its last layer when the net grows deeper.
    """
    given = [v for v in (neurons, kernels, strides) if v is not None]
    if not given:
        return base
    depth = max(len(v) for v in given)
    for v in given:
        if len(v) != depth:
            raise ConfigError(
                "--neurons/--kernels/--strides must have matching lengths, got "
                f"{[len(v) for v in given]}"
            )
    def pick(i, col, override):
        if override is not None:
            return override[i]
        return base[min(i, len(base) - 1)][col]
    return [[pick(i, 0, neurons), pick(i, 1, kernels), pick(i, 2, strides)]
            for i in range(depth)]


# flag destination -> RunConfig field
_FLAG_FIELDS = {
    "seed": "seed", "f64": "f64", "threads": "threads",
    "lr": "learning_rate", "batch_size": "batch_size", "epochs": "max_epochs",
    "val_fraction": "validation_fraction", "patience": "patience",
    "q": "q_order", "dense_width": "dense_width", "input_length": "input_length",
}


def resolve_run_config(args) -> tuple[RunConfig, set[str]]:
    """Defaults <- config file <- flags; returns the config and which fields
    were explicitly set by the user (needed for checkpoint-compat checks)."""
    cfg = RunConfig()
    valid = {f.name for f in fields(RunConfig)}
    explicit: set[str] = set()

    config_path = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        unknown = set(loaded) - valid
        if unknown:
            raise ConfigError(f"unknown config keys in {path}: {sorted(unknown)}")
        for key, value in loaded.items():
            setattr(cfg, key, value)
            explicit.add(key)

    for flag, field_name in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, field_name, value)
            explicit.add(field_name)

    neurons = getattr(args, "neurons", None)
    kernels = getattr(args, "kernels", None)
    strides = getattr(args, "strides", None)
    if any(v is not None for v in (neurons, kernels, strides)):
        cfg.op_layers = _resolve_op_layers(
            cfg.op_layers,
            _parse_int_list(neurons, "--neurons") if neurons else None,
            _parse_int_list(kernels, "--kernels") if kernels else None,
            _parse_int_list(strides, "--strides") if strides else None,
        )
        explicit.add("op_layers")

    cfg.model_config()      # validate geometry eagerly
    cfg.train_config()
    return cfg, explicit


def _check_model_compat(run: RunConfig, explicit: set[str], ckpt_config: ModelConfig):
    """Explicit model-geometry settings must agree with the checkpoint."""
    if not explicit & set(MODEL_KEYS):
        return
    requested = run.model_config()
    if requested != ckpt_config:
        raise ConfigError(
            "requested model geometry does not match the checkpoint: "
            f"requested {requested}, checkpoint holds {ckpt_config}"
        )


def _sync_run_to_checkpoint(run: RunConfig, params, ckpt_config: ModelConfig):
    """Echoed configs must describe the model that actually ran."""
    run.input_length = ckpt_config.input_length
    run.op_layers = [list(spec) for spec in ckpt_config.op_layers]
    run.q_order = ckpt_config.q_order
    run.dense_width = ckpt_config.dense_width
    run.output_classes = ckpt_config.output_classes
    run.f64 = params.dtype == np.float64


def _load_split_segments(args, run: RunConfig):
    """Segments selected by the data flags, honoring --split where given."""
    want = getattr(args, "split", "all")
    if args.synth:
        spec = resolve_synth_spec(args.synth)
        segments = build_synthetic_dataset(seed=run.seed, dtype=run.dtype, **spec)
        if want == "all":
            return segments, "synth:" + args.synth
        train, test = split_train_validation(segments, 0.5, run.seed)
        return (train if want == "train" else test), "synth:" + args.synth
    entries = parse_manifest(args.manifest)
    base_dir = args.base_dir or str(Path(args.manifest).parent)
    if want == "all":
        chosen = [e for e in entries
                  if (args.machine is None or e.machine == args.machine)
                  and (args.signal is None or e.signal_kind == args.signal)]
        if not chosen:
            raise SplitError("no manifest entries match --machine/--signal selection")
        segments = build_dataset(chosen, base_dir=base_dir, dtype=run.dtype,
                                 max_workers=run.threads)
        return segments, "manifest:" + args.manifest
    train, test = build_small_defect_split(
        entries, args.machine or "A", args.signal, seed=run.seed,
        base_dir=base_dir, dtype=run.dtype,
        cap_fault_segments=getattr(args, "cap_fault_segments", None),
        max_workers=run.threads,
    )
    return (train if want == "train" else test), "manifest:" + args.manifest


def cmd_train(args) -> int:
    run, _ = resolve_run_config(args)
    if args.synth:
        spec = resolve_synth_spec(args.synth)
        segments = build_synthetic_dataset(seed=run.seed, dtype=run.dtype, **spec)
        train_segments, held_out = split_train_validation(segments, 0.5, run.seed)
        source = "synth:" + args.synth
    else:
        entries = parse_manifest(args.manifest)
        base_dir = args.base_dir or str(Path(args.manifest).parent)
        train_segments, held_out = build_small_defect_split(
            entries, args.machine or "A", args.signal, seed=run.seed,
            base_dir=base_dir, dtype=run.dtype,
            cap_fault_segments=args.cap_fault_segments, max_workers=run.threads,
        )
        source = "manifest:" + args.manifest

    model_config = run.model_config()
    report, params = train_model(train_segments, model_config, run.train_config(),
                                 dtype=run.dtype)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, model_config, out_path)
    report.checkpoint_path = str(out_path)

    report_path = Path(args.report) if args.report else Path(str(out_path) + ".report.json")
    payload = {
        "config": run.to_dict(),
        "data": {
            "source": source,
            "train_segments": len(train_segments),
            "held_out_segments": len(held_out),
        },
        "train": report.to_dict(),
    }
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    print(f"trained on {len(train_segments)} segments "
          f"({len(held_out)} held out), {report.epochs_run} epochs, "
          f"best validation loss {report.best_val_loss:.6f} "
          f"at epoch {report.selected_epoch}")
    print(f"checkpoint: {out_path}")
    print(f"report: {report_path}")
    return 0


def cmd_evaluate(args) -> int:
    run, explicit = resolve_run_config(args)
    params, ckpt_config = load_checkpoint(args.model)
    _check_model_compat(run, explicit, ckpt_config)
    _sync_run_to_checkpoint(run, params, ckpt_config)

    segments, source = _load_split_segments(args, run)
    if not segments:
        raise SplitError("selection yielded zero segments")
    predictions = predict_labels(params, ckpt_config, segments,
                                 max_workers=run.threads)
    reports = report_by_group(segments, predictions)
    pooled = compute_metrics(
        accumulate_confusion(predictions, [s.label for s in segments])
    )

    print(render_metrics_table(reports))
    print(f"overall: {len(segments)} segments, "
          f"accuracy {100 * pooled.accuracy:.2f}%, f1 {100 * pooled.f1:.2f}%")
    if args.json:
        extra = {
            "config": run.to_dict(),
            "model": str(args.model),
            "data_source": source,
            "split": getattr(args, "split", "all"),
            "overall": pooled.to_dict(),
        }
        Path(args.json).write_text(reports_to_json(reports, extra) + "\n")
        print(f"json report: {args.json}")
    if args.csv:
        write_reports_csv(reports, args.csv)
        print(f"csv report: {args.csv}")
    return 0


def cmd_infer(args) -> int:
    params, config = load_checkpoint(args.model)
    path = Path(args.recording)
    sample_format = args.format or ("csv" if path.suffix == ".csv" else "f32le")
    recording = read_recording_file(path, sample_format)
    if recording.samples.size < config.input_length:
        raise RecordingError(
            f"recording holds {recording.samples.size} samples, "
            f"need at least {config.input_length}"
        )
    for index, window in enumerate(segment_recording(recording, config.input_length)):
        outputs = model_forward(params, config,
                                normalize_segment(window, dtype=params.dtype))
        label = classify_segment(outputs)
        print(f"{index}\t{outputs[0]:+.6f}\t{outputs[1]:+.6f}\t{label}")
    return 0


def cmd_synth(args) -> int:
    run, _ = resolve_run_config(args)
    spec = resolve_synth_spec(args.spec)
    for key in ("n_healthy", "n_faulty", "duration_s", "rpm", "noise_rms"):
        value = getattr(args, key, None)
        if value is not None:
            spec[key] = value
    manifest_path = write_synth_corpus(args.out, seed=run.seed,
                                       sample_format=args.format, **spec)
    print(f"wrote {spec['n_healthy']} healthy + {spec['n_faulty']} faulty "
          f"recordings ({spec['duration_s']} s each) to {args.out}")
    print(f"manifest: {manifest_path}")
    return 0


def cmd_bench(args) -> int:
    run, _ = resolve_run_config(args)
    if args.model:
        params, config = load_checkpoint(args.model)
        _sync_run_to_checkpoint(run, params, config)
    else:
        config = run.model_config()
        params = init_parameters(config, run.seed, dtype=run.dtype)
    stats = bench_forward(params, config, n_segments=args.n,
                          repetitions=args.repetitions, seed=run.seed)
    print(f"model: {param_count(config)} parameters, "
          f"{np.dtype(params.dtype).name}, single thread")
    print(f"latency per 1 s segment over {stats.n_timings} runs: "
          f"mean {stats.mean_ms:.3f} ms, median {stats.median_ms:.3f} ms, "
          f"p95 {stats.p95_ms:.3f} ms")
    print(f"real-time factor: {stats.real_time_factor:.1f}x "
          f"(1000 ms budget / mean latency)")
    if args.json:
        payload = {"config": run.to_dict(), "model": args.model,
                   "bench": stats.to_dict()}
        Path(args.json).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"json report: {args.json}")
    return 0


def cmd_inspect(args) -> int:
    params, config = load_checkpoint(args.model)
    print(f"checkpoint: {args.model}")
    print(f"numeric mode: {np.dtype(params.dtype).name}")
    print(f"input length: {config.input_length}")
    for i, spec in enumerate(config.op_layers):
        print(f"operational layer {i}: {spec.out_neurons} neurons, "
              f"kernel {spec.kernel_size}, stride {spec.stride}")
    print(f"q order: {config.q_order}")
    print(f"dense width: {config.dense_width}")
    print(f"output classes: {config.output_classes}")
    print(f"parameters: {param_count(config)}")
    print(f"crc32: {stored_checksum(args.model):08x}")
    return 0


def _add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", metavar="PATH",
                        help="JSON config file; flags override its values")
    parser.add_argument("--seed", type=int, help="master seed (default 0)")
    parser.add_argument("--f64", action="store_const", const=True, default=None,
                        help="use 64-bit floats instead of 32-bit")
    parser.add_argument("--threads", type=int,
                        help="cap worker and BLAS thread count")
    parser.add_argument("--json", metavar="PATH",
                        help="write a structured JSON report")
    parser.add_argument("--csv", metavar="PATH",
                        help="write a per-group CSV report")


def _add_model_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--input-length", dest="input_length", type=int)
    parser.add_argument("--q", type=int, help="polynomial order of every neuron")
    parser.add_argument("--neurons", help="comma-separated neurons per layer")
    parser.add_argument("--kernels", help="comma-separated kernel sizes")
    parser.add_argument("--strides", help="comma-separated strides")
    parser.add_argument("--dense-width", dest="dense_width", type=int)


def _add_data_flags(parser: argparse.ArgumentParser, with_split: bool):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--manifest", metavar="PATH", help="manifest CSV")
    source.add_argument("--synth", metavar="SPEC",
                        help='"default" or a JSON synthetic-corpus spec')
    parser.add_argument("--machine", choices=["A", "B"],
                        help="restrict manifest entries to one machine")
    parser.add_argument("--signal", choices=["sound", "vibration"],
                        help="restrict manifest entries to one signal kind")
    parser.add_argument("--base-dir", dest="base_dir",
                        help="directory recordings are relative to "
                             "(default: the manifest's directory)")
    if with_split:
        parser.add_argument("--split", choices=["all", "train", "test"],
                            default="all",
                            help="evaluate only one side of the train/test split")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selfonn",
        description="Self-organized operational neural networks for bearing "
                    "fault detection on raw 1D waveforms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="build the train split and fit a model")
    _add_common_flags(p)
    _add_model_flags(p)
    _add_data_flags(p, with_split=False)
    p.add_argument("--cap-fault-segments", dest="cap_fault_segments", type=int,
                   help="subsample the fault side of the train split to N segments")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--report", help="training report path (default: OUT.report.json)")
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int, help="maximum training epochs")
    p.add_argument("--val-fraction", dest="val_fraction", type=float,
                   help="fraction of the train split held out for validation")
    p.add_argument("--patience", type=int,
                   help="stop after this many epochs without validation improvement")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint per sensor group")
    _add_common_flags(p)
    _add_model_flags(p)
    _add_data_flags(p, with_split=True)
    p.add_argument("--cap-fault-segments", dest="cap_fault_segments", type=int,
                   help=argparse.SUPPRESS)
    p.add_argument("--model", required=True, help="checkpoint to evaluate")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("infer", help="classify every window of one recording")
    _add_common_flags(p)
    p.add_argument("--model", required=True, help="checkpoint to run")
    p.add_argument("--recording", required=True, help="recording file")
    p.add_argument("--format", choices=["csv", "f32le"],
                   help="recording format (default: by file extension)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("synth", help="write a synthetic corpus plus manifest")
    _add_common_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--spec", default="default",
                   help='"default" or a JSON spec file')
    p.add_argument("--n-healthy", dest="n_healthy", type=int)
    p.add_argument("--n-faulty", dest="n_faulty", type=int)
    p.add_argument("--duration", dest="duration_s", type=float,
                   help="seconds per recording")
    p.add_argument("--rpm", type=int)
    p.add_argument("--noise-rms", dest="noise_rms", type=float)
    p.add_argument("--format", choices=["csv", "f32le"], default="f32le")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="measure single-thread forward latency")
    _add_common_flags(p)
    _add_model_flags(p)
    p.add_argument("--model", help="checkpoint to time (default: fresh init)")
    p.add_argument("--n", type=int, default=100, help="segments per repetition")
    p.add_argument("--repetitions", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="print checkpoint geometry and checksum")
    _add_common_flags(p)
    p.add_argument("model", help="checkpoint path")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = getattr(args, "threads", None)
    limiter = threadpool_limits(limits=threads) if threads else contextlib.nullcontext()
    try:
        with limiter:
            return args.func(args)
    except (ManifestError, RecordingError, SplitError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 4
    except (ConfigError, CheckpointError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
