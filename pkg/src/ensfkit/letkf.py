"""Local ensemble transform Kalman filter on the cyclic lattice.

Analysis runs independently per state index inside a hard-cutoff ring
neighborhood, in ensemble space, with a symmetric square-root transform.
Multiplicative inflation scales the forecast perturbations before the
analysis; the observation operator is applied member by member, so
nonlinear operators need no linearization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    InsufficientEnsembleError,
    NumericalOverflowError,
    RegularizedSolveWarning,
)
from .ldyn import ObservationModel, _apply_operator


@dataclass(frozen=True)
class LETKFConfig:
    """Analysis settings: inflation factor and ring-localization radius dial."""

    ensemble_size: int = 20
    inflation: float = 1.1
    localization: float = 4.0
    eig_floor: float = 1e-10

    def __post_init__(self):
        problems = []
        if self.ensemble_size < 2:
            problems.append("ensemble_size must be at least 2")
        if not (np.isfinite(self.inflation) and self.inflation > 0):
            problems.append("inflation must be positive")
        if not (np.isfinite(self.localization) and self.localization > 0):
            problems.append("localization must be positive")
        if self.eig_floor <= 0:
            problems.append("eig_floor must be positive")
        if problems:
            raise ConfigError(problems)


def local_radius(localization: float) -> int:
    """Ring radius for a localization dial: sub-1 values collapse to the diagonal."""
    if localization < 1.0:
        return 0
    return int(math.ceil(localization))


def local_region(i: int, cfg: LETKFConfig, dimension: int) -> np.ndarray:
    """Cyclic index window centered on ``i``; covers everything once saturated."""
    if not 0 <= i < dimension:
        raise DimensionError(f"index {i} outside [0, {dimension})")
    r = local_radius(cfg.localization)
    if 2 * r + 1 >= dimension:
        return np.arange(dimension)
    return (i + np.arange(-r, r + 1)) % dimension


def solve_weight_matrix(a_mat: np.ndarray, eig_floor: float = 1e-10):
    """Invert an ensemble-space weight matrix and take its symmetric root.

    Eigenvalues below ``eig_floor`` are raised to it, with a warning, so a
    singular input degrades to a regularized solve instead of failing.
    Returns ``(inverse, inverse_sqrt)``.
    """
    lam, q = np.linalg.eigh(a_mat)
    if float(lam.min()) < eig_floor:
        warnings.warn(
            f"weight matrix eigenvalue {lam.min():.3e} below floor {eig_floor:.1e}; "
            "solve regularized",
            RegularizedSolveWarning,
            stacklevel=2,
        )
        lam = np.maximum(lam, eig_floor)
    inv = (q / lam) @ q.T
    inv_sqrt = (q / np.sqrt(lam)) @ q.T
    return inv, inv_sqrt


def letkf_analysis(
    forecast: np.ndarray,
    y,
    obs: ObservationModel,
    cfg: LETKFConfig,
) -> np.ndarray:
    """Deterministic local analysis of a forecast ensemble.

    Parameters
    ----------
    forecast : array, shape (J, d)
        Forecast ensemble, one member per row, J >= 2.
    y : array, shape (d,)
        Observation vector (one observation per state index).
    obs : ObservationModel
        Componentwise operator and noise level; sigma_obs must be positive.
    cfg : LETKFConfig
        Inflation and localization dials.

    Returns
    -------
    array, shape (J, d): the analysis ensemble.
    """
    X = np.asarray(forecast, dtype=float)
    if X.ndim != 2:
        raise DimensionError("forecast must be a (J, d) array")
    J, d = X.shape
    if J < 2:
        raise InsufficientEnsembleError("LETKF needs at least 2 members")
    y = np.asarray(y, dtype=float)
    if y.shape != (d,):
        raise DimensionError(f"observation shape {y.shape} does not match state ({d},)")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise NumericalOverflowError("non-finite forecast or observation")
    if obs.sigma_obs <= 0:
        raise ConfigError("LETKF analysis requires sigma_obs > 0")

    xbar = X.mean(axis=0)
    anomalies = (X - xbar) * cfg.inflation
    inflated = xbar + anomalies
    g_members = _apply_operator(inflated, obs)
    gbar = g_members.mean(axis=0)
    g_anoms = g_members - gbar
    innovation = y - gbar
    inv_var = 1.0 / obs.sigma_obs**2

    identity_scaled = (J - 1) * np.eye(J)
    analysis = np.empty_like(X)
    global_region = 2 * local_radius(cfg.localization) + 1 >= d
    weights = None
    for i in range(d):
        if weights is None or not global_region:
            region = local_region(i, cfg, d)
            y_loc = g_anoms[:, region]
            a_mat = identity_scaled + (y_loc @ y_loc.T) * inv_var
            p_tilde, p_sqrt = solve_weight_matrix(a_mat, cfg.eig_floor)
            wbar = p_tilde @ (y_loc @ innovation[region]) * inv_var
            w_sym = math.sqrt(J - 1) * p_sqrt
            weights = wbar[None, :] + w_sym
        analysis[:, i] = xbar[i] + weights @ anomalies[:, i]
    return analysis
