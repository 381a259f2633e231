"""Tracking-quality metrics: RMSE, ensemble spread, and CRPS.

CRPS uses the exact closed form for an empirical ensemble, evaluated with a
sort instead of the quadratic pairwise sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InsufficientEnsembleError

CSV_COLUMNS = (
    "method",
    "repetition",
    "time_index",
    "kind",
    "rmse",
    "spread",
    "crps",
    "shock_flag",
)


@dataclass
class MetricsRecord:
    """One scored time point of one repetition."""

    method: str
    repetition: int
    time_index: int
    kind: str
    rmse: float
    spread: float
    crps: float
    shock_flag: bool


def rmse(state: np.ndarray, truth: np.ndarray) -> float:
    """Root mean square error between a state estimate and the truth."""
    state = np.asarray(state, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if state.shape != truth.shape:
        raise DimensionError(
            f"state shape {state.shape} does not match truth {truth.shape}"
        )
    diff = state - truth
    return float(np.sqrt(np.mean(diff * diff)))


def ensemble_spread(ensemble: np.ndarray) -> float:
    """Square root of the mean per-index unbiased ensemble variance."""
    ensemble = np.asarray(ensemble, dtype=float)
    if ensemble.ndim != 2:
        raise DimensionError("ensemble must be a (J, d) array")
    if ensemble.shape[0] < 2:
        raise InsufficientEnsembleError("spread needs at least 2 members")
    return float(np.sqrt(np.mean(np.var(ensemble, axis=0, ddof=1))))


def crps(ensemble: np.ndarray, value) -> float:
    """CRPS of the empirical ensemble forecast against a realized value.

    ``ensemble`` is (J,) for a scalar variable or (J, d) for a state vector;
    vector input returns the average of the per-index scalar scores. The
    pairwise-distance term is evaluated through the sorted-order identity,
    so cost is O(J log J) per index rather than O(J^2).
    """
    ensemble = np.asarray(ensemble, dtype=float)
    value = np.asarray(value, dtype=float)
    squeeze = ensemble.ndim == 1
    if squeeze:
        ensemble = ensemble[:, None]
        value = value.reshape(1)
    if ensemble.ndim != 2:
        raise DimensionError("ensemble must be (J,) or (J, d)")
    n_members, dim = ensemble.shape
    if n_members == 0:
        raise InsufficientEnsembleError("CRPS needs at least 1 member")
    if value.shape != (dim,):
        raise DimensionError(
            f"value shape {value.shape} does not match ensemble ({dim},)"
        )
    mean_abs_err = np.mean(np.abs(ensemble - value), axis=0)
    ordered = np.sort(ensemble, axis=0)
    coeff = 2.0 * np.arange(n_members) - n_members + 1
    pair_term = coeff @ ordered / n_members**2
    return float(np.mean(mean_abs_err - pair_term))
