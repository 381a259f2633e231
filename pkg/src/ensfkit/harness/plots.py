"""Static SVG charts rendered from the written artifacts, not live state."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def plot_rmse_series(csv_path, out_path) -> Path:
    """RMSE-over-time lines, one per method label, averaged across reps."""
    by_method = defaultdict(lambda: defaultdict(list))
    with open(csv_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            by_method[row["method"]][int(row["time_index"])].append(
                float(row["rmse"])
            )
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for method in sorted(by_method):
        series = by_method[method]
        times = sorted(series)
        means = [float(np.mean(series[t])) for t in times]
        ax.plot(times, means, label=method, linewidth=1.2)
    ax.set_xlabel("model step")
    ax.set_ylabel("RMSE (mean over repetitions)")
    ax.set_yscale("log")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return out_path


def plot_sweep_heatmap(grid_json_path, out_path) -> Path:
    """Aggregated-RMSE heatmap of a sweep grid; divergent cells are hatched out."""
    with open(grid_json_path, encoding="utf-8") as fh:
        body = json.load(fh)
    values1 = body["axis1"]["values"]
    values2 = body["axis2"]["values"] if body["axis2"] else [None]
    grid = np.full((len(values1), len(values2)), np.nan)
    for cell in body["cells"]:
        if cell["aggregate_rmse"] is not None and cell["status"] == "ok":
            grid[cell["i"], cell["j"]] = cell["aggregate_rmse"]

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 5))
    masked = np.ma.masked_invalid(grid)
    image = ax.imshow(masked, origin="lower", aspect="auto", cmap="viridis")
    image.cmap.set_bad(color="#b0b0b0")
    ax.set_xticks(range(len(values2)))
    ax.set_xticklabels(["" if v is None else f"{v:g}" for v in values2], fontsize=8)
    ax.set_yticks(range(len(values1)))
    ax.set_yticklabels([f"{v:g}" for v in values1], fontsize=8)
    ax.set_xlabel(body["axis2"]["name"] if body["axis2"] else "")
    ax.set_ylabel(body["axis1"]["name"])
    fig.colorbar(image, ax=ax, label="aggregated RMSE (grey = divergent)")
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return out_path
