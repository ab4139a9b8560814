"""Self-organized operational neural networks for 1D bearing fault detection.

Operational layers generalize convolutions: each kernel tap applies a
learned Q-th order polynomial to its input sample instead of a single
multiplication, so a Q=1 model is exactly a plain CNN.  The package
covers the full pipeline: signal segmentation and normalization, the
network forward/backward passes written directly in numpy, Adam training,
binary checkpoints, synthetic corpus generation, per-sensor evaluation
and latency benchmarking, plus the `selfonn` command-line tool.
"""

from .checkpoint import (
    BadMagicError,
    CheckpointError,
    ChecksumError,
    ShapeMismatchError,
    TruncatedCheckpointError,
    VersionMismatchError,
    load_checkpoint,
    save_checkpoint,
    stored_checksum,
)
from .data import (
    DefectConfig,
    EnergyRatioDetector,
    ManifestEntry,
    ManifestError,
    RecordingError,
    SplitError,
    SynthConfig,
    band_energy_ratio,
    build_dataset,
    build_small_defect_split,
    build_synthetic_dataset,
    generate_synthetic_recording,
    load_recording,
    parse_manifest,
    read_recording_file,
    write_manifest,
    write_recording_csv,
    write_recording_f32le,
    write_synth_corpus,
)
from .evaluation import (
    BenchStats,
    ConfusionCounts,
    MetricsReport,
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
    GenerativeDenseLayer,
    ModelConfig,
    ModelParameters,
    OperationalConvLayer,
    OpLayerSpec,
    clone_parameters,
    conv_geometry,
    flatten_width,
    generative_dense_forward,
    init_parameters,
    model_forward,
    model_forward_cached,
    operational_conv_direct,
    operational_conv_forward,
    param_blocks,
    param_count,
    raise_to_powers,
    shape_trace,
    zero_parameters,
)
from .signals import (
    FAULTY,
    HEALTHY,
    LABELS,
    Recording,
    SAMPLE_RATE_HZ,
    SEGMENT_SAMPLES,
    Segment,
    SegmentMeta,
    normalize_segment,
    segment_recording,
)
from .training import (
    AdamState,
    DivergenceError,
    TrainConfig,
    TrainReport,
    adam_step,
    encode_target,
    encode_targets,
    finite_difference_oracle,
    model_backward,
    mse_loss,
    split_train_validation,
    train_model,
)

__version__ = "0.1.0"
