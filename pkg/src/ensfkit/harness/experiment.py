"""Seeded twin experiments: truth generation, filtering, per-step metrics.

Every random draw comes from a substream derived from (master_seed,
repetition, role, *cell), so repetitions, methods, and sweep cells never
share or race on generator state, and results do not depend on execution
order.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..ensf import backward_sample
from ..errors import NumericalOverflowError, SamplerDivergenceError
from ..ldyn import apply_shocks, init_true_state, observe, rk4_step
from ..letkf import letkf_analysis
from ..metrics import MetricsRecord, crps, ensemble_spread, rmse
from ..rng import ROLE_FILTER, ROLE_OBS, ROLE_SHOCKS, ROLE_TRUTH, substream
from .config import ExperimentConfig

KIND_ASSIMILATION = "assimilation"
KIND_PREDICTION = "prediction-only"


@dataclass
class SnapshotRow:
    """Truth and ensemble-mean state vectors captured at one time index."""

    repetition: int
    time_index: int
    truth: np.ndarray
    estimate: np.ndarray


@dataclass
class RepetitionResult:
    """All per-step records of one repetition plus its divergence status."""

    repetition: int
    records: list
    truth_digest: str
    diverged: bool = False
    divergence_time: int | None = None
    snapshots: list = field(default_factory=list)


@dataclass
class RunOutput:
    """One experiment's full output: per-repetition records and wall time."""

    config: ExperimentConfig
    repetitions: list
    wall_time_seconds: float

    @property
    def records(self) -> list:
        return [rec for rep in self.repetitions for rec in rep.records]

    @property
    def truth_digests(self) -> list:
        return [rep.truth_digest for rep in self.repetitions]


def generate_truth(cfg: ExperimentConfig, repetition: int, cell: tuple = ()):
    """Truth trajectory and shock flags for one repetition.

    Returns ``(trajectory, shock_flags)`` with trajectory shaped
    ``(total_steps + 1, d)``. Shocks are drawn once per assimilation window
    and perturb the state entering the window's first model step; the flag
    marks that step's row.
    """
    rng_truth = substream(cfg.master_seed, repetition, ROLE_TRUTH, *cell)
    rng_shock = substream(cfg.master_seed, repetition, ROLE_SHOCKS, *cell)
    x = init_true_state(cfg.model, rng_truth, burn_in=cfg.burn_in)
    trajectory = np.empty((cfg.total_steps + 1, cfg.model.dimension))
    flags = np.zeros(cfg.total_steps + 1, dtype=bool)
    trajectory[0] = x
    between = cfg.steps_between_assimilation
    for t in range(1, cfg.total_steps + 1):
        if cfg.shock is not None and (t - 1) % between == 0:
            x, fired = apply_shocks(
                x, cfg.shock, rng_shock, bound=cfg.model.clip_bound, return_fired=True
            )
            flags[t] = any(fired)
        x = rk4_step(x, cfg.model)
        trajectory[t] = x
    return trajectory, flags


def _score_row(cfg, method_name, repetition, t, kind, ensemble, truth_t, flag):
    return MetricsRecord(
        method=method_name,
        repetition=repetition,
        time_index=t,
        kind=kind,
        rmse=rmse(ensemble.mean(axis=0), truth_t),
        spread=ensemble_spread(ensemble),
        crps=crps(ensemble, truth_t) if cfg.compute_crps else float("nan"),
        shock_flag=bool(flag),
    )


def run_repetition(
    cfg: ExperimentConfig, repetition: int, cell: tuple = ()
) -> RepetitionResult:
    """One repetition of the twin experiment, metrics at every model step."""
    trajectory, shock_flags = generate_truth(cfg, repetition, cell)
    rng_obs = substream(cfg.master_seed, repetition, ROLE_OBS, *cell)
    rng_filter = substream(cfg.master_seed, repetition, ROLE_FILTER, *cell)
    mcfg = cfg.method_config
    name = cfg.display_name
    between = cfg.steps_between_assimilation

    ensemble = rng_filter.standard_normal((mcfg.ensemble_size, cfg.model.dimension))
    result = RepetitionResult(
        repetition=repetition,
        records=[
            _score_row(
                cfg, name, repetition, 0, KIND_PREDICTION, ensemble, trajectory[0], False
            )
        ],
        truth_digest=hashlib.sha256(trajectory.tobytes()).hexdigest(),
    )
    if cfg.snapshot_stride:
        result.snapshots.append(
            SnapshotRow(repetition, 0, trajectory[0].copy(), ensemble.mean(axis=0))
        )

    for t in range(1, cfg.total_steps + 1):
        # a sampler blow-up or an ensemble too large for the dynamics both
        # mean the filter lost the state: mark the repetition divergent and
        # let the remaining repetitions proceed
        try:
            ensemble = rk4_step(ensemble, cfg.model)
            kind = KIND_PREDICTION
            if t % between == 0:
                y = observe(trajectory[t], cfg.obs, rng_obs)
                if cfg.method == "ensf":
                    if mcfg.prediction_noise_std > 0.0:
                        ensemble = ensemble + mcfg.prediction_noise_std * (
                            rng_filter.standard_normal(ensemble.shape)
                        )
                    ensemble = backward_sample(ensemble, y, cfg.obs, mcfg, rng_filter)
                else:
                    ensemble = letkf_analysis(ensemble, y, cfg.obs, mcfg)
                kind = KIND_ASSIMILATION
        except (SamplerDivergenceError, NumericalOverflowError):
            result.diverged = True
            result.divergence_time = t
            break
        result.records.append(
            _score_row(
                cfg, name, repetition, t, kind, ensemble, trajectory[t], shock_flags[t]
            )
        )
        if cfg.snapshot_stride and t % cfg.snapshot_stride == 0:
            result.snapshots.append(
                SnapshotRow(repetition, t, trajectory[t].copy(), ensemble.mean(axis=0))
            )
    return result


def run_experiment(
    cfg: ExperimentConfig, cell: tuple = (), threads: int = 1
) -> RunOutput:
    """All repetitions of one experiment.

    A divergent repetition keeps its rows up to the failure and is marked;
    the remaining repetitions still run. With ``threads > 1`` repetitions
    run concurrently; output order stays deterministic either way.
    """
    start = time.perf_counter()
    reps = range(cfg.repetitions)
    if threads > 1 and cfg.repetitions > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: run_repetition(cfg, r, cell), reps))
    else:
        results = [run_repetition(cfg, r, cell) for r in reps]
    return RunOutput(
        config=cfg,
        repetitions=results,
        wall_time_seconds=time.perf_counter() - start,
    )
