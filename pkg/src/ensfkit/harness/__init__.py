"""Experiment orchestration: configs, twin runs, sweeps, comparison, timing."""

from .compare import run_compare
from .config import (
    AGGREGATION_WINDOWS,
    ENSF_AXES,
    LETKF_AXES,
    METHODS,
    ExperimentConfig,
    ScalingConfig,
    SweepAxis,
    SweepConfig,
    config_as_dict,
    load_compare_config,
    load_experiment_config,
    load_scaling_config,
    load_sweep_config,
)
from .experiment import (
    KIND_ASSIMILATION,
    KIND_PREDICTION,
    RepetitionResult,
    RunOutput,
    SnapshotRow,
    generate_truth,
    run_experiment,
    run_repetition,
)
from .outputs import (
    atomic_write_text,
    config_digest,
    format_float,
    write_metrics_csv,
    write_metrics_json,
    write_run_metadata,
    write_scaling_csv,
    write_scaling_json,
    write_snapshots_csv,
    write_sweep_grid_csv,
    write_sweep_grid_json,
)
from .scaling import ScalingRow, run_scaling, time_assimilation_cycles
from .sweep import (
    STATUS_DIVERGENT,
    STATUS_OK,
    SweepCell,
    SweepResult,
    aggregate_rmse,
    apply_axis,
    run_sweep,
)

__all__ = [
    "AGGREGATION_WINDOWS",
    "ENSF_AXES",
    "KIND_ASSIMILATION",
    "KIND_PREDICTION",
    "LETKF_AXES",
    "METHODS",
    "STATUS_DIVERGENT",
    "STATUS_OK",
    "ExperimentConfig",
    "RepetitionResult",
    "RunOutput",
    "ScalingConfig",
    "ScalingRow",
    "SnapshotRow",
    "SweepAxis",
    "SweepCell",
    "SweepConfig",
    "SweepResult",
    "aggregate_rmse",
    "apply_axis",
    "atomic_write_text",
    "config_as_dict",
    "config_digest",
    "format_float",
    "generate_truth",
    "load_compare_config",
    "load_experiment_config",
    "load_scaling_config",
    "load_sweep_config",
    "run_compare",
    "run_experiment",
    "run_repetition",
    "run_scaling",
    "run_sweep",
    "time_assimilation_cycles",
    "write_metrics_csv",
    "write_metrics_json",
    "write_run_metadata",
    "write_scaling_csv",
    "write_scaling_json",
    "write_snapshots_csv",
    "write_sweep_grid_csv",
    "write_sweep_grid_json",
]
