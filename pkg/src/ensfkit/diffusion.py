"""Interpolating diffusion schedules on pseudo-time [0, 1].

The schedules are linear with strictly positive endpoints, so the mean
factor never reaches zero and the noise variance never vanishes:

    alpha_bar(tau) = 1 - tau * (1 - eps_alpha)
    beta_bar_sq(tau) = eps_beta + tau * (1 - eps_beta)

Drift and squared diffusion of the matching reverse-time dynamics follow in
closed form from those two lines; no numerical differentiation happens at
runtime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, DomainError


def _check_tau(tau):
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0) or not np.all(np.isfinite(t)):
        raise DomainError("pseudo-time must lie in [0, 1]")
    return t if t.ndim else float(t)


@dataclass(frozen=True)
class DiffusionSchedule:
    """Schedule endpoints plus the pseudo-time step count of the solver."""

    eps_alpha: float = 0.5
    eps_beta: float = 0.025
    pseudo_steps: int = 500

    def __post_init__(self):
        problems = []
        if not 0.0 < self.eps_alpha < 1.0:
            problems.append("eps_alpha must lie strictly inside (0, 1)")
        if not 0.0 < self.eps_beta < 1.0:
            problems.append("eps_beta must lie strictly inside (0, 1)")
        if self.pseudo_steps < 1:
            problems.append("pseudo_steps must be a positive integer")
        if problems:
            raise ConfigError(problems)

    def alpha_bar(self, tau):
        """Mean-decay factor; 1 at tau=0, eps_alpha at tau=1."""
        t = _check_tau(tau)
        return 1.0 - t * (1.0 - self.eps_alpha)

    def beta_bar_sq(self, tau):
        """Noise variance; eps_beta at tau=0, 1 at tau=1."""
        t = _check_tau(tau)
        return self.eps_beta + t * (1.0 - self.eps_beta)

    def drift_coef(self, tau):
        """Reverse-dynamics drift coefficient, the log-derivative of alpha_bar."""
        return -(1.0 - self.eps_alpha) / self.alpha_bar(tau)

    def diffusion_sq(self, tau):
        """Squared diffusion coefficient of the reverse dynamics."""
        return (1.0 - self.eps_beta) + 2.0 * (1.0 - self.eps_alpha) * self.beta_bar_sq(
            tau
        ) / self.alpha_bar(tau)

    def gaussian_log_kernel(self, z, z0, tau):
        """Unnormalized log-density of z given z0 under the forward kernel.

        Sums over the last axis; the additive normalization constant is
        dropped because every consumer normalizes weights anyway.
        """
        z = np.asarray(z, dtype=float)
        z0 = np.asarray(z0, dtype=float)
        if z.shape[-1] != z0.shape[-1]:
            raise DimensionError(
                f"kernel arguments disagree on dimension: {z.shape} vs {z0.shape}"
            )
        a = self.alpha_bar(tau)
        b2 = self.beta_bar_sq(tau)
        resid = z - a * z0
        return -np.sum(resid * resid, axis=-1) / (2.0 * b2)

    def sample_conditional(self, z0, tau, rng: np.random.Generator):
        """One exact draw of z_tau given z_0 through the closed-form kernel."""
        z0 = np.asarray(z0, dtype=float)
        a = self.alpha_bar(tau)
        b = np.sqrt(self.beta_bar_sq(tau))
        return a * z0 + b * rng.standard_normal(z0.shape)

    def partition(self) -> np.ndarray:
        """Uniform pseudo-time grid with pseudo_steps + 1 nodes from 0 to 1."""
        return np.linspace(0.0, 1.0, self.pseudo_steps + 1)
