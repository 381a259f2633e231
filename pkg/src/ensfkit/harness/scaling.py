"""Wall-clock timing of assimilation cycles across state dimensions."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from ..ensf import ensf_step
from ..ldyn import init_true_state, observe, propagate, rk4_step
from ..letkf import letkf_analysis
from ..rng import ROLE_FILTER, ROLE_OBS, ROLE_TRUTH, substream
from .config import ExperimentConfig, ScalingConfig


@dataclass
class ScalingRow:
    """Timing summary for one (method, dimension) pair."""

    method: str
    dimension: int
    mean_step_seconds: float
    std_step_seconds: float
    repetitions: int


def time_assimilation_cycles(
    cfg: ExperimentConfig, repetitions: int = 20, warmup: int = 2, cell: tuple = ()
):
    """Per-cycle wall times for ``repetitions`` assimilation cycles.

    One cycle is the full filter step: propagate the ensemble across the
    assimilation window, then update on a fresh observation. Warmup cycles
    run first and are discarded. Returns the kept times in seconds.
    """
    rng_truth = substream(cfg.master_seed, 0, ROLE_TRUTH, *cell)
    rng_obs = substream(cfg.master_seed, 0, ROLE_OBS, *cell)
    rng_filter = substream(cfg.master_seed, 0, ROLE_FILTER, *cell)
    mcfg = cfg.method_config
    d = cfg.model.dimension
    truth = init_true_state(cfg.model, rng_truth, burn_in=cfg.burn_in)
    ensemble = rng_filter.standard_normal((mcfg.ensemble_size, d))
    between = cfg.steps_between_assimilation

    times = []
    for cycle in range(warmup + repetitions):
        truth = propagate(truth, cfg.model, between)
        y = observe(truth, cfg.obs, rng_obs)
        start = time.perf_counter()
        if cfg.method == "ensf":
            ensemble = ensf_step(
                ensemble, y, cfg.model, cfg.obs, mcfg, between, rng_filter
            )
        else:
            for _ in range(between):
                ensemble = rk4_step(ensemble, cfg.model)
            ensemble = letkf_analysis(ensemble, y, cfg.obs, mcfg)
        elapsed = time.perf_counter() - start
        if cycle >= warmup:
            times.append(elapsed)
    return times


def run_scaling(scfg: ScalingConfig, threads: int = 1) -> list:
    """Timing table over the configured dimensions.

    Cells always run serially regardless of ``threads``: concurrent timing
    would contaminate the wall-clock measurements it exists to take.
    """
    del threads
    rows = []
    for k, d in enumerate(scfg.dimensions):
        cfg = replace(scfg.base, model=replace(scfg.base.model, dimension=d))
        times = time_assimilation_cycles(
            cfg, repetitions=scfg.repetitions, warmup=scfg.warmup, cell=(k,)
        )
        rows.append(
            ScalingRow(
                method=cfg.method,
                dimension=d,
                mean_step_seconds=float(np.mean(times)),
                std_step_seconds=float(np.std(times)),
                repetitions=scfg.repetitions,
            )
        )
    return rows
