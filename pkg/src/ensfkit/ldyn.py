"""Cyclic Lorenz-96 dynamics, observations, and truth-side shock injection.

State vectors are plain float arrays whose last axis is the spatial
dimension; every operation here broadcasts over leading axes, so a whole
ensemble propagates with one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    NumericalOverflowError,
)

OBS_OPERATORS = ("arctan", "linear-identity")


@dataclass(frozen=True)
class Lorenz96Params:
    """Model constants for the cyclic lattice.

    ``damping_term`` selects the standard form with the relaxation term
    ``-x_i``; disabling it drops that term, which lets trajectories run out
    to the clip bound instead of the usual attractor range.
    """

    dimension: int
    forcing: float = 8.0
    dt: float = 0.01
    damping_term: bool = True
    clip_bound: float = 50.0

    def __post_init__(self):
        problems = []
        if self.dimension < 4:
            problems.append("dimension must be at least 4 for cyclic coupling")
        if self.dt < 0:
            problems.append("dt must be non-negative")
        if self.clip_bound <= 0:
            problems.append("clip_bound must be positive")
        if not np.isfinite(self.forcing):
            problems.append("forcing must be finite")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class ObservationModel:
    """Componentwise observation operator plus i.i.d. Gaussian noise level."""

    operator: str = "arctan"
    sigma_obs: float = 0.05

    def __post_init__(self):
        problems = []
        if self.operator not in OBS_OPERATORS:
            problems.append(
                f"operator must be one of {OBS_OPERATORS}, got {self.operator!r}"
            )
        if not (np.isfinite(self.sigma_obs) and self.sigma_obs >= 0):
            problems.append("sigma_obs must be finite and non-negative")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class ShockEvent:
    """One shock category: fires with ``probability`` per assimilation window."""

    probability: float
    size: float

    def __post_init__(self):
        problems = []
        if not 0.0 <= self.probability <= 1.0:
            problems.append("shock probability must lie in [0, 1]")
        if not (np.isfinite(self.size) and self.size >= 0):
            problems.append("shock size must be finite and non-negative")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class ShockModel:
    """Collection of independent shock events evaluated once per window."""

    events: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for ev in self.events:
            if not isinstance(ev, ShockEvent):
                raise ConfigError("shock events must be ShockEvent instances")


def _check_finite(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NumericalOverflowError(f"non-finite values in {what}")
    return x


def lorenz96_rhs(x: np.ndarray, params: Lorenz96Params) -> np.ndarray:
    """Time derivative of the cyclic lattice, vectorized over leading axes."""
    x = _check_finite(x, "state")
    if x.shape[-1] != params.dimension:
        raise DimensionError(
            f"state has {x.shape[-1]} components, params expect {params.dimension}"
        )
    xp1 = np.roll(x, -1, axis=-1)
    xm2 = np.roll(x, 2, axis=-1)
    xm1 = np.roll(x, 1, axis=-1)
    dxdt = (xp1 - xm2) * xm1 + params.forcing
    if params.damping_term:
        dxdt = dxdt - x
    return dxdt


def rk4_step(x: np.ndarray, params: Lorenz96Params) -> np.ndarray:
    """One classical Runge-Kutta step of length ``params.dt``.

    The magnitude clip applies once, after the full step; intermediate
    stages are never clipped.
    """
    dt = params.dt
    k1 = lorenz96_rhs(x, params)
    k2 = lorenz96_rhs(x + 0.5 * dt * k1, params)
    k3 = lorenz96_rhs(x + 0.5 * dt * k2, params)
    k4 = lorenz96_rhs(x + dt * k3, params)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return clip_magnitude(out, params.clip_bound)


def clip_magnitude(x: np.ndarray, bound: float) -> np.ndarray:
    """Clamp every component into [-bound, bound]."""
    if not (np.isfinite(bound) and bound > 0):
        raise DomainError("clip bound must be positive and finite")
    return np.clip(np.asarray(x, dtype=float), -bound, bound)


def propagate(x: np.ndarray, params: Lorenz96Params, n_steps: int) -> np.ndarray:
    """Apply ``n_steps`` solver steps; broadcasts over an ensemble."""
    if n_steps < 0:
        raise DomainError("n_steps must be non-negative")
    out = np.asarray(x, dtype=float)
    for _ in range(n_steps):
        out = rk4_step(out, params)
    return out


def init_true_state(
    params: Lorenz96Params,
    rng: np.random.Generator,
    burn_in: int = 1000,
    init_std: float = 3.0,
) -> np.ndarray:
    """Draw a cold start from N(0, init_std^2 I) and relax it onto the attractor.

    The default burn-in of 1000 solver steps is long enough for the transient
    to die out at the default dt.
    """
    if burn_in < 0:
        raise DomainError("burn_in must be non-negative")
    x = init_std * rng.standard_normal(params.dimension)
    return propagate(x, params, burn_in)


def _apply_operator(x: np.ndarray, model: ObservationModel) -> np.ndarray:
    if model.operator == "arctan":
        return np.arctan(x)
    return np.asarray(x, dtype=float)


def observe(
    x: np.ndarray, model: ObservationModel, rng: np.random.Generator
) -> np.ndarray:
    """Componentwise observation ``g(x) + sigma_obs * noise``."""
    x = _check_finite(x, "state")
    clean = _apply_operator(x, model)
    return clean + model.sigma_obs * rng.standard_normal(clean.shape)


def grad_log_likelihood(
    z: np.ndarray, y: np.ndarray, model: ObservationModel
) -> np.ndarray:
    """Gradient in ``z`` of the Gaussian observation log-density.

    Parameters
    ----------
    z : array, shape (..., d)
        Points at which the gradient is evaluated; leading axes broadcast.
    y : array, shape (d,)
        Observed vector.
    model : ObservationModel
        Must have strictly positive noise level.

    Returns
    -------
    array with the shape of ``z``.
    """
    if model.sigma_obs == 0:
        raise ConfigError("grad_log_likelihood requires sigma_obs > 0")
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if z.shape[-1] != y.shape[-1] or y.ndim != 1:
        raise DimensionError(
            f"observation shape {y.shape} does not match state tail {z.shape}"
        )
    inv_var = 1.0 / model.sigma_obs**2
    if model.operator == "arctan":
        # chain rule through arctan: d/dz arctan(z) = 1 / (1 + z^2)
        return -(np.arctan(z) - y) * inv_var / (1.0 + z * z)
    return -(z - y) * inv_var


def apply_shocks(
    x: np.ndarray,
    model: ShockModel,
    rng: np.random.Generator,
    bound: float = 50.0,
    return_fired: bool = False,
):
    """Randomly perturb the true state, scaling with component magnitude.

    Each event fires independently with its own probability; a firing event
    adds ``size * Z_i * |x_i|`` with standard normal ``Z``, all magnitudes
    taken from the incoming state. The result is clipped to ``bound``.

    With ``return_fired`` the per-event outcome is returned too, which the
    harness uses to annotate output rows.
    """
    x = _check_finite(x, "state")
    base = np.abs(x)
    out = x.copy()
    fired = []
    for ev in model.events:
        hit = bool(rng.random() < ev.probability)
        fired.append(hit)
        if hit:
            out = out + ev.size * rng.standard_normal(x.shape) * base
    out = clip_magnitude(out, bound)
    if return_fired:
        return out, fired
    return out
