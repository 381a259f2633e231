"""Training-free score estimation from prediction ensembles.

The prior score at a diffusion state ``z`` is a kernel-weighted combination
of per-sample Gaussian scores over a mini-batch of predictions. The weights
collapse algebraically into a weighted batch mean, so the estimator is
evaluated as ``-(z - alpha_bar * weighted_mean) / beta_bar_sq``; weights are
computed in the log domain with the running maximum subtracted so distant
batch points underflow to zero weight instead of producing NaNs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .diffusion import DiffusionSchedule
from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    InsufficientEnsembleError,
    NumericalOverflowError,
)
from .ldyn import ObservationModel, grad_log_likelihood

ONE_MINUS_TAU = "one-minus-tau"

DampingSpec = Union[str, np.ndarray]


def validate_damping(spec) -> None:
    """Check a damping selection: the named default or a knot table.

    A table is an (m, 2) array of (tau, value) rows with strictly increasing
    tau from 0 to 1, values non-increasing from 1 to 0.
    """
    if isinstance(spec, str):
        if spec != ONE_MINUS_TAU:
            raise ConfigError(f"unknown damping selection {spec!r}")
        return
    table = np.asarray(spec, dtype=float)
    problems = []
    if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
        raise ConfigError("damping table must be an (m, 2) array with m >= 2")
    taus, vals = table[:, 0], table[:, 1]
    if not (taus[0] == 0.0 and taus[-1] == 1.0):
        problems.append("damping table must span tau from 0 to 1")
    if np.any(np.diff(taus) <= 0):
        problems.append("damping table taus must be strictly increasing")
    if not (vals[0] == 1.0 and vals[-1] == 0.0):
        problems.append("damping must run from 1 at tau=0 to 0 at tau=1")
    if np.any(np.diff(vals) > 0):
        problems.append("damping values must be non-increasing")
    if problems:
        raise ConfigError(problems)


@dataclass(frozen=True)
class ScoreContext:
    """Everything a score evaluation needs besides the query point."""

    predictions: np.ndarray
    schedule: DiffusionSchedule
    batch_size: int = 1
    damping: DampingSpec = ONE_MINUS_TAU

    def __post_init__(self):
        preds = np.asarray(self.predictions, dtype=float)
        if preds.ndim != 2 or preds.shape[1] == 0:
            raise DimensionError("predictions must be a (J, d) array")
        if preds.shape[0] == 0:
            raise InsufficientEnsembleError("prediction ensemble is empty")
        if not np.all(np.isfinite(preds)):
            raise NumericalOverflowError("non-finite values in predictions")
        object.__setattr__(self, "predictions", preds)
        if not 1 <= self.batch_size <= preds.shape[0]:
            raise InsufficientEnsembleError(
                f"batch_size {self.batch_size} outside [1, {preds.shape[0]}]"
            )
        validate_damping(self.damping)


def sample_minibatch(total: int, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform index draw without replacement.

    The full batch is the identity index set (no permutation, no generator
    consumption); a singleton batch is one uniform index.
    """
    if total < 1:
        raise InsufficientEnsembleError("cannot draw from an empty ensemble")
    if not 1 <= batch_size <= total:
        raise InsufficientEnsembleError(
            f"batch_size {batch_size} outside [1, {total}]"
        )
    if batch_size == total:
        return np.arange(total)
    if batch_size == 1:
        return rng.integers(0, total, size=1)
    return rng.choice(total, size=batch_size, replace=False)


def _validate_batch(batch, total: int) -> np.ndarray:
    idx = np.asarray(batch)
    if idx.size == 0:
        raise InsufficientEnsembleError("mini-batch is empty")
    if np.any(idx < 0) or np.any(idx >= total):
        raise DimensionError("mini-batch indices out of range")
    return idx


def kernel_weights(z, tau, ctx: ScoreContext, batch) -> np.ndarray:
    """Normalized kernel weights of the batch members at query point z."""
    idx = _validate_batch(batch, ctx.predictions.shape[0])
    if idx.shape == () or len(idx) == 1:
        return np.ones(1)
    logw = ctx.schedule.gaussian_log_kernel(
        np.asarray(z, dtype=float), ctx.predictions[idx], tau
    )
    logw = logw - logw.max()
    w = np.exp(logw)
    return w / w.sum()


def prior_score_rows(Z: np.ndarray, tau: float, ctx: ScoreContext, idx: np.ndarray) -> np.ndarray:
    """Prior score for a stack of query points with per-row mini-batches.

    Parameters
    ----------
    Z : array, shape (m, d)
        Query points, one per row.
    tau : float
        Pseudo-time of the evaluation.
    idx : array, shape (m, N)
        Row ``i`` holds the mini-batch indices used for query ``i``.

    Returns
    -------
    array, shape (m, d)
    """
    a = ctx.schedule.alpha_bar(tau)
    b2 = ctx.schedule.beta_bar_sq(tau)
    picked = ctx.predictions[idx]  # (m, N, d)
    if idx.shape[1] == 1:
        weighted_mean = picked[:, 0, :]
    else:
        resid = Z[:, None, :] - a * picked
        logw = -np.sum(resid * resid, axis=2) / (2.0 * b2)
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        w /= w.sum(axis=1, keepdims=True)
        weighted_mean = np.einsum("mn,mnd->md", w, picked)
    return -(Z - a * weighted_mean) / b2


def estimate_prior_score(z, tau, ctx: ScoreContext, batch) -> np.ndarray:
    """Mini-batch estimate of the prior score at one query point."""
    z = np.asarray(z, dtype=float)
    if z.shape != (ctx.predictions.shape[1],):
        raise DimensionError(
            f"query point shape {z.shape} does not match predictions"
        )
    idx = _validate_batch(batch, ctx.predictions.shape[0]).reshape(1, -1)
    return prior_score_rows(z.reshape(1, -1), float(tau), ctx, idx)[0]


def damping(tau, ctx_or_spec) -> float:
    """Likelihood damping factor h(tau): 1 at tau=0 decaying to 0 at tau=1."""
    spec = ctx_or_spec.damping if isinstance(ctx_or_spec, ScoreContext) else ctx_or_spec
    t = float(tau)
    if not 0.0 <= t <= 1.0:
        raise DomainError("damping is defined on tau in [0, 1]")
    if isinstance(spec, str):
        validate_damping(spec)
        return 1.0 - t
    table = np.asarray(spec, dtype=float)
    validate_damping(table)
    return float(np.interp(t, table[:, 0], table[:, 1]))


def posterior_score(z, tau, ctx: ScoreContext, batch, y, obs: ObservationModel) -> np.ndarray:
    """Prior score plus the damped observation log-density gradient."""
    prior = estimate_prior_score(z, tau, ctx, batch)
    h = damping(tau, ctx)
    if h == 0.0:
        return prior
    return prior + h * grad_log_likelihood(np.asarray(z, dtype=float), y, obs)
