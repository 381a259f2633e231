"""Posterior sampling by reverse-time diffusion over the prediction ensemble.

The update draws standard-normal seeds and integrates them backward through
an Euler-Maruyama discretization of the reverse dynamics, steering with the
mini-batch posterior score. There is no forward SDE anywhere: the forward
half of the construction is analytic and only its closed forms appear here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffusion import DiffusionSchedule
from .errors import ConfigError, SamplerDivergenceError
from .ldyn import Lorenz96Params, ObservationModel, grad_log_likelihood, propagate
from .score import (
    ONE_MINUS_TAU,
    DampingSpec,
    ScoreContext,
    damping,
    prior_score_rows,
    validate_damping,
)


@dataclass(frozen=True)
class EnSFConfig:
    """Sampler settings: ensemble size, mini-batch size, schedule, damping."""

    ensemble_size: int = 20
    batch_size: int = 1
    schedule: DiffusionSchedule = field(default_factory=DiffusionSchedule)
    damping: DampingSpec = ONE_MINUS_TAU
    prediction_noise_std: float = 0.0

    def __post_init__(self):
        problems = []
        if self.ensemble_size < 1:
            problems.append("ensemble_size must be positive")
        if self.batch_size < 1:
            problems.append("batch_size must be positive")
        if self.prediction_noise_std < 0:
            problems.append("prediction_noise_std must be non-negative")
        if problems:
            raise ConfigError(problems)
        validate_damping(self.damping)


def _draw_batches(rng: np.random.Generator, rows: int, total: int, n: int) -> np.ndarray:
    """Per-row mini-batch indices, redrawn fresh for every pseudo-step.

    Full batch uses the identity index set without consuming the generator;
    otherwise each row gets its own draw (without replacement within a row).
    """
    if n == total:
        return np.broadcast_to(np.arange(total), (rows, total))
    if n == 1:
        return rng.integers(0, total, size=(rows, 1))
    keys = rng.random((rows, total))
    return np.argpartition(keys, n - 1, axis=1)[:, :n]


def backward_sample(
    predictions: np.ndarray,
    y,
    obs: ObservationModel | None,
    cfg: EnSFConfig,
    rng: np.random.Generator,
    score_fn=None,
) -> np.ndarray:
    """Draw a posterior ensemble by reverse-time integration.

    Parameters
    ----------
    predictions : array, shape (Jp, d)
        Forecast ensemble defining the prior score.
    y : array, shape (d,) or None
        Observation for the likelihood term; may be None only with score_fn.
    obs : ObservationModel or None
        Observation operator and noise level; may be None only with score_fn.
    cfg : EnSFConfig
        Sampler settings; cfg.schedule fixes the pseudo-time partition.
    rng : numpy Generator
        Consumed in a fixed order per pseudo-step: mini-batch indices first,
        then the Brownian increment. Identical generators reproduce the
        output bit for bit.
    score_fn : callable, optional
        Full score override with signature (z, tau) -> array like z. Used
        for oracle checks with analytic scores; when given, no mini-batches
        are drawn and no likelihood term is added.

    Returns
    -------
    array, shape (cfg.ensemble_size, d)

    Raises
    ------
    SamplerDivergenceError
        If any member turns non-finite; carries the pseudo-step index and
        the first offending member.
    """
    preds = np.asarray(predictions, dtype=float)
    if preds.ndim != 2 or preds.shape[0] == 0:
        raise ConfigError("predictions must be a non-empty (J, d) array")
    d = preds.shape[1]
    schedule = cfg.schedule
    n_steps = schedule.pseudo_steps
    dtau = 1.0 / n_steps

    ctx = None
    if score_fn is None:
        if y is None or obs is None:
            raise ConfigError("backward_sample needs y and obs unless score_fn is given")
        y = np.asarray(y, dtype=float)
        if y.shape != (d,):
            raise ConfigError(
                f"observation shape {y.shape} does not match state dimension {d}"
            )
        ctx = ScoreContext(preds, schedule, cfg.batch_size, cfg.damping)

    z = rng.standard_normal((cfg.ensemble_size, d))
    for k in range(n_steps - 1, -1, -1):
        # coefficients and score all sit at the right endpoint of the substep
        tau = (k + 1) / n_steps
        if score_fn is not None:
            s_val = np.asarray(score_fn(z, tau), dtype=float)
        else:
            idx = _draw_batches(rng, z.shape[0], preds.shape[0], cfg.batch_size)
            s_val = prior_score_rows(z, tau, ctx, idx)
            h = damping(tau, ctx)
            if h != 0.0:
                s_val = s_val + h * grad_log_likelihood(z, y, obs)
        drift = schedule.drift_coef(tau)
        diff_sq = schedule.diffusion_sq(tau)
        noise = rng.standard_normal(z.shape)
        z = z - (drift * z - diff_sq * s_val) * dtau + np.sqrt(diff_sq * dtau) * noise
        finite_rows = np.isfinite(z).all(axis=1)
        if not finite_rows.all():
            member = int(np.flatnonzero(~finite_rows)[0])
            raise SamplerDivergenceError(step=k, member=member)
    return z


def ensf_step(
    posterior_prev: np.ndarray,
    y,
    model: Lorenz96Params,
    obs: ObservationModel,
    cfg: EnSFConfig,
    steps_between: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """One full assimilation cycle: propagate the ensemble, then update.

    Every member advances ``steps_between`` solver steps to form the
    prediction ensemble (plus optional additive prediction noise), which
    then conditions the backward sampler on the new observation.
    """
    prev = np.asarray(posterior_prev, dtype=float)
    if prev.ndim != 2 or prev.shape[0] == 0:
        raise ConfigError("posterior ensemble must be a non-empty (J, d) array")
    if steps_between < 1:
        raise ConfigError("steps_between must be at least 1")
    preds = propagate(prev, model, steps_between)
    if cfg.prediction_noise_std > 0.0:
        preds = preds + cfg.prediction_noise_std * rng.standard_normal(preds.shape)
    return backward_sample(preds, y, obs, cfg, rng)
