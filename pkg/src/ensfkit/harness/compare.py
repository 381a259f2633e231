"""Method comparison against one shared truth and observation realization."""

from __future__ import annotations

from ..errors import ConfigError
from .config import ExperimentConfig
from .experiment import RunOutput, run_experiment

# fields every entry must share so the twin setup is actually identical
_SHARED_FIELDS = (
    "model",
    "obs",
    "shock",
    "total_steps",
    "steps_between_assimilation",
    "repetitions",
    "master_seed",
    "initial_ensemble",
    "burn_in",
    "snapshot_stride",
    "compute_crps",
)


def _check_shared(cfgs) -> list:
    problems = []
    first = cfgs[0]
    for k, cfg in enumerate(cfgs[1:], start=1):
        for name in _SHARED_FIELDS:
            if getattr(cfg, name) != getattr(first, name):
                problems.append(
                    f"entry {k} differs from entry 0 in shared field {name!r}"
                )
    return problems


def run_compare(cfgs, threads: int = 1) -> list:
    """Run each config against the identical truth; returns aligned RunOutputs.

    All entries must share everything except the filter method and label;
    any drift in the shared fields is a validation error. The shared truth
    is verified by digest, not assumed.
    """
    cfgs = list(cfgs)
    if not cfgs:
        raise ConfigError("compare needs at least one config")
    for cfg in cfgs:
        if not isinstance(cfg, ExperimentConfig):
            raise ConfigError("compare entries must be ExperimentConfig instances")
    labels = [cfg.display_name for cfg in cfgs]
    problems = _check_shared(cfgs)
    if len(set(labels)) != len(labels):
        problems.append("entry labels must be unique; set run.label per entry")
    if problems:
        raise ConfigError(problems)

    outputs = [run_experiment(cfg, threads=threads) for cfg in cfgs]
    reference = outputs[0].truth_digests
    for out in outputs[1:]:
        if out.truth_digests != reference:
            raise ConfigError(
                "truth trajectories drifted between compare entries; "
                "shared-seed invariant violated"
            )
    return outputs
