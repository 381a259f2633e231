"""Ensemble score filtering and LETKF baselines on cyclic chaotic dynamics."""

__version__ = "0.1.0"

from .diffusion import DiffusionSchedule
from .ensf import EnSFConfig, backward_sample, ensf_step
from .ldyn import (
    Lorenz96Params,
    ObservationModel,
    ShockEvent,
    ShockModel,
    apply_shocks,
    clip_magnitude,
    grad_log_likelihood,
    init_true_state,
    lorenz96_rhs,
    observe,
    propagate,
    rk4_step,
)
from .letkf import LETKFConfig, letkf_analysis, local_region
from .metrics import MetricsRecord, crps, ensemble_spread, rmse
from .score import ONE_MINUS_TAU, estimate_prior_score, posterior_score

__all__ = [
    "__version__",
    "DiffusionSchedule",
    "EnSFConfig",
    "LETKFConfig",
    "Lorenz96Params",
    "MetricsRecord",
    "ONE_MINUS_TAU",
    "ObservationModel",
    "ShockEvent",
    "ShockModel",
    "apply_shocks",
    "backward_sample",
    "clip_magnitude",
    "crps",
    "ensemble_spread",
    "ensf_step",
    "estimate_prior_score",
    "grad_log_likelihood",
    "init_true_state",
    "letkf_analysis",
    "local_region",
    "lorenz96_rhs",
    "observe",
    "posterior_score",
    "propagate",
    "rk4_step",
    "rmse",
]
