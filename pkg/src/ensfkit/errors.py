"""Exception types shared across the package."""

from __future__ import annotations


class EnsfKitError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EnsfKitError, ValueError):
    """Invalid configuration. Collects every violated constraint, not just the first."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DomainError(EnsfKitError, ValueError):
    """Argument outside its mathematical domain (e.g. pseudo-time not in [0, 1])."""


class DimensionError(EnsfKitError, ValueError):
    """Array shapes disagree or a dimension is invalid."""


class NumericalOverflowError(EnsfKitError, ArithmeticError):
    """Non-finite values fed into or produced by a numerical kernel."""


class InsufficientEnsembleError(EnsfKitError, ValueError):
    """Operation requires more ensemble members than were supplied."""


class SamplerDivergenceError(EnsfKitError, RuntimeError):
    """Backward sampler produced non-finite state; carries the failing step and member."""

    def __init__(self, step: int, member: int, message: str | None = None):
        self.step = step
        self.member = member
        super().__init__(
            message
            or f"non-finite sampler state at pseudo-step k={step}, member j={member}"
        )


class RegularizedSolveWarning(UserWarning):
    """Eigenvalue floor engaged while inverting an ensemble-space weight matrix."""
