"""Command-line front end: run, sweep, compare, scaling, validate-config.

Successful commands print a one-line JSON summary to stdout and exit 0.
Failures print machine-readable JSON to stderr: exit code 2 for
configuration and usage problems, 1 for runtime errors. The default output
directory can be overridden with the ENSFKIT_OUT_DIR environment variable;
an explicit --out always wins.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, EnsfKitError
from .harness import (
    config_digest,
    load_compare_config,
    load_experiment_config,
    load_scaling_config,
    load_sweep_config,
    run_compare,
    run_experiment,
    run_scaling,
    run_sweep,
    write_metrics_csv,
    write_metrics_json,
    write_run_metadata,
    write_scaling_csv,
    write_scaling_json,
    write_snapshots_csv,
    write_sweep_grid_csv,
    write_sweep_grid_json,
)
from .harness.config import validate_config_file

OUT_DIR_ENV = "ENSFKIT_OUT_DIR"
DEFAULT_OUT = "ensfkit-out"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ensfkit",
        description="Twin-experiment harness for ensemble filters on Lorenz-96.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_run_flags=True):
        p.add_argument("--config", required=True, help="TOML or JSON config file")
        if with_run_flags:
            p.add_argument(
                "--out",
                help=f"output directory (default: ${OUT_DIR_ENV} or ./{DEFAULT_OUT})",
            )
            p.add_argument("--seed", type=int, help="override run.master_seed")
            p.add_argument("--reps", type=int, help="override repetition count")
            p.add_argument("--threads", type=int, default=1,
                           help="worker threads (default 1)")
            p.add_argument("--format", choices=("csv", "json"), default="csv",
                           help="metric table format (default csv)")
            p.add_argument("--plots", action="store_true",
                           help="also render SVG charts from the outputs")

    add_common(sub.add_parser("run", help="run one twin experiment"))
    add_common(sub.add_parser("sweep", help="run a hyper-parameter grid sweep"))
    add_common(sub.add_parser("compare", help="run aligned method comparisons"))
    add_common(sub.add_parser("scaling", help="time assimilation cycles by dimension"))
    add_common(
        sub.add_parser("validate-config", help="check a config file and exit"),
        with_run_flags=False,
    )
    return parser


def _resolve_out_dir(args) -> Path:
    if getattr(args, "out", None):
        out = Path(args.out)
    elif os.environ.get(OUT_DIR_ENV):
        out = Path(os.environ[OUT_DIR_ENV])
    else:
        out = Path(DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_overrides(cfg, args):
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.reps is not None:
        updates["repetitions"] = args.reps
    return replace(cfg, **updates) if updates else cfg


def _emit(summary: dict) -> int:
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_experiment_config(args.config), args)
    out_dir = _resolve_out_dir(args)
    output = run_experiment(cfg, threads=args.threads)

    files = []
    if args.format == "json":
        files.append(write_metrics_json(output.records, out_dir / "metrics.json"))
    if args.format == "csv" or args.plots:
        files.append(write_metrics_csv(output.records, out_dir / "metrics.csv"))
    files.append(write_run_metadata(output, out_dir / "metadata.json"))
    if any(rep.snapshots for rep in output.repetitions):
        files.append(write_snapshots_csv(output, out_dir / "snapshots.csv"))
    if args.plots:
        from .harness.plots import plot_rmse_series

        files.append(plot_rmse_series(out_dir / "metrics.csv", out_dir / "rmse.svg"))
    return _emit(
        {
            "command": "run",
            "out_dir": str(out_dir),
            "files": [f.name for f in files],
            "rows": len(output.records),
            "diverged_repetitions": [
                rep.repetition for rep in output.repetitions if rep.diverged
            ],
            "wall_time_seconds": output.wall_time_seconds,
        }
    )


def _cmd_sweep(args) -> int:
    sweep = load_sweep_config(args.config)
    sweep = replace(sweep, base=_apply_overrides(sweep.base, args))
    out_dir = _resolve_out_dir(args)
    result = run_sweep(sweep, threads=args.threads)

    files = [write_sweep_grid_json(result, out_dir / "grid.json")]
    if args.format == "csv":
        files.append(write_sweep_grid_csv(result, out_dir / "grid.csv"))
    if args.plots:
        from .harness.plots import plot_sweep_heatmap

        files.append(plot_sweep_heatmap(out_dir / "grid.json", out_dir / "grid.svg"))
    return _emit(
        {
            "command": "sweep",
            "out_dir": str(out_dir),
            "files": [f.name for f in files],
            "cells": len(result.cells),
            "divergent_cells": sum(
                1 for c in result.cells if c.status == "divergent"
            ),
            "wall_time_seconds": result.wall_time_seconds,
        }
    )


def _cmd_compare(args) -> int:
    cfgs = [_apply_overrides(c, args) for c in load_compare_config(args.config)]
    out_dir = _resolve_out_dir(args)
    outputs = run_compare(cfgs, threads=args.threads)

    records = [rec for out in outputs for rec in out.records]
    files = []
    if args.format == "json":
        files.append(write_metrics_json(records, out_dir / "metrics.json"))
    if args.format == "csv" or args.plots:
        files.append(write_metrics_csv(records, out_dir / "metrics.csv"))
    meta_extra = {
        "kind": "compare",
        "entries": [
            {
                "label": out.config.display_name,
                "method": out.config.method,
                "config_digest": config_digest(out.config),
            }
            for out in outputs
        ],
        "shared_truth_digests": outputs[0].truth_digests,
    }
    files.append(
        write_run_metadata(outputs[0], out_dir / "metadata.json", extra=meta_extra)
    )
    if args.plots:
        from .harness.plots import plot_rmse_series

        files.append(plot_rmse_series(out_dir / "metrics.csv", out_dir / "rmse.svg"))
    return _emit(
        {
            "command": "compare",
            "out_dir": str(out_dir),
            "files": [f.name for f in files],
            "entries": [out.config.display_name for out in outputs],
            "rows": len(records),
            "wall_time_seconds": sum(out.wall_time_seconds for out in outputs),
        }
    )


def _cmd_scaling(args) -> int:
    scfg = load_scaling_config(args.config)
    scfg = replace(scfg, base=_apply_overrides(scfg.base, args))
    if args.reps is not None:
        scfg = replace(scfg, repetitions=args.reps)
    out_dir = _resolve_out_dir(args)
    rows = run_scaling(scfg, threads=args.threads)

    files = [write_scaling_json(rows, out_dir / "scaling.json")]
    if args.format == "csv":
        files.append(write_scaling_csv(rows, out_dir / "scaling.csv"))
    return _emit(
        {
            "command": "scaling",
            "out_dir": str(out_dir),
            "files": [f.name for f in files],
            "dimensions": list(scfg.dimensions),
            "mean_step_seconds": [r.mean_step_seconds for r in rows],
        }
    )


def _cmd_validate(args) -> int:
    cfg, sections = validate_config_file(args.config)
    return _emit(
        {
            "command": "validate-config",
            "valid": True,
            "sections": sections,
            "method": cfg.method,
            "config_digest": config_digest(cfg),
        }
    )


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "scaling": _cmd_scaling,
    "validate-config": _cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(
            json.dumps(
                {"error": "config-error", "detail": str(exc), "problems": exc.problems}
            ),
            file=sys.stderr,
        )
        return 2
    except EnsfKitError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
            file=sys.stderr,
        )
        return 1
    except OSError as exc:
        print(json.dumps({"error": "io-error", "detail": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
