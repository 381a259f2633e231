"""Deterministic artifact writing: metric CSVs, metadata JSON, grids.

Floats are rendered with %.17g so values round-trip exactly and files are
byte-identical across runs with the same config and seed. Wall time lives
only in the metadata JSON, never in the CSVs. All writes are atomic
(temp file in the target directory, then rename).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from pathlib import Path

import numpy as np

from .. import __version__
from .config import ExperimentConfig, config_as_dict
from .experiment import RunOutput
from .sweep import SweepResult
from ..metrics import CSV_COLUMNS


def format_float(value: float) -> str:
    return "%.17g" % float(value)


def _format_cell(value) -> str:
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format_cell(v) for v in row])
    return buf.getvalue()


def config_digest(cfg: ExperimentConfig) -> str:
    """Stable sha256 of the canonical JSON form of a config."""
    canonical = json.dumps(config_as_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# metric series
# ---------------------------------------------------------------------------


def _record_row(rec):
    return (
        rec.method,
        rec.repetition,
        rec.time_index,
        rec.kind,
        rec.rmse,
        rec.spread,
        rec.crps,
        rec.shock_flag,
    )


def write_metrics_csv(records, path) -> Path:
    return atomic_write_text(
        path, _csv_text(CSV_COLUMNS, (_record_row(r) for r in records))
    )


def write_metrics_json(records, path) -> Path:
    rows = [
        {
            "method": r.method,
            "repetition": r.repetition,
            "time_index": r.time_index,
            "kind": r.kind,
            "rmse": r.rmse,
            "spread": r.spread,
            "crps": None if math.isnan(r.crps) else r.crps,
            "shock_flag": bool(r.shock_flag),
        }
        for r in records
    ]
    return atomic_write_text(path, json.dumps(rows, indent=2) + "\n")


def write_snapshots_csv(output: RunOutput, path) -> Path:
    header = ("repetition", "time_index", "state_index", "truth", "estimate")

    def rows():
        for rep in output.repetitions:
            for snap in rep.snapshots:
                for i, (tv, ev) in enumerate(zip(snap.truth, snap.estimate)):
                    yield (snap.repetition, snap.time_index, i, float(tv), float(ev))

    return atomic_write_text(path, _csv_text(header, rows()))


def write_run_metadata(output: RunOutput, path, extra: dict | None = None) -> Path:
    meta = {
        "kind": "run",
        "version": __version__,
        "config_digest": config_digest(output.config),
        "config": config_as_dict(output.config),
        "master_seed": output.config.master_seed,
        "wall_time_seconds": output.wall_time_seconds,
        "repetitions": [
            {
                "repetition": rep.repetition,
                "truth_digest": rep.truth_digest,
                "diverged": rep.diverged,
                "divergence_time": rep.divergence_time,
                "rows": len(rep.records),
            }
            for rep in output.repetitions
        ],
    }
    if extra:
        meta.update(extra)
    return atomic_write_text(path, json.dumps(meta, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# sweep grids
# ---------------------------------------------------------------------------


def write_sweep_grid_csv(result: SweepResult, path) -> Path:
    axis2 = result.config.axis2
    header = (
        "axis1_name",
        "axis1_value",
        "axis2_name",
        "axis2_value",
        "aggregate_rmse",
        "status",
    )

    def rows():
        for c in result.cells:
            yield (
                result.config.axis1.name,
                float(c.value1),
                axis2.name if axis2 else "",
                float(c.value2) if c.value2 is not None else "",
                c.aggregate,
                c.status,
            )

    return atomic_write_text(path, _csv_text(header, rows()))


def write_sweep_grid_json(result: SweepResult, path, wall_time: bool = True) -> Path:
    cfg = result.config
    body = {
        "kind": "sweep",
        "version": __version__,
        "base_config_digest": config_digest(cfg.base),
        "axis1": {"name": cfg.axis1.name, "values": list(cfg.axis1.values)},
        "axis2": (
            {"name": cfg.axis2.name, "values": list(cfg.axis2.values)}
            if cfg.axis2
            else None
        ),
        "window": cfg.window,
        "divergence_cap": cfg.divergence_cap,
        "cells": [
            {
                "i": c.i,
                "j": c.j,
                "value1": c.value1,
                "value2": c.value2,
                "aggregate_rmse": None if np.isinf(c.aggregate) else c.aggregate,
                "status": c.status,
            }
            for c in result.cells
        ],
        "top3": [
            {"value1": c.value1, "value2": c.value2, "aggregate_rmse": c.aggregate}
            for c in result.top3
        ],
    }
    if wall_time:
        body["wall_time_seconds"] = result.wall_time_seconds
    return atomic_write_text(path, json.dumps(body, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# scaling tables
# ---------------------------------------------------------------------------

_SCALING_HEADER = (
    "method",
    "dimension",
    "mean_step_seconds",
    "std_step_seconds",
    "repetitions",
)


def write_scaling_csv(rows, path) -> Path:
    return atomic_write_text(
        path,
        _csv_text(
            _SCALING_HEADER,
            (
                (
                    r.method,
                    r.dimension,
                    r.mean_step_seconds,
                    r.std_step_seconds,
                    r.repetitions,
                )
                for r in rows
            ),
        ),
    )


def write_scaling_json(rows, path) -> Path:
    body = {
        "kind": "scaling",
        "version": __version__,
        "rows": [
            {
                "method": r.method,
                "dimension": r.dimension,
                "mean_step_seconds": r.mean_step_seconds,
                "std_step_seconds": r.std_step_seconds,
                "repetitions": r.repetitions,
            }
            for r in rows
        ],
    }
    return atomic_write_text(path, json.dumps(body, indent=2, sort_keys=True) + "\n")


__all__ = [
    "atomic_write_text",
    "config_digest",
    "format_float",
    "write_metrics_csv",
    "write_metrics_json",
    "write_run_metadata",
    "write_snapshots_csv",
    "write_scaling_csv",
    "write_scaling_json",
    "write_sweep_grid_csv",
    "write_sweep_grid_json",
]
