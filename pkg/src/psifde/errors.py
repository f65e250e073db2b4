"""Exception types shared across the package."""

from __future__ import annotations


class PsifdeError(Exception):
    """Base class for all package-specific errors."""


class DomainError(PsifdeError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularityError(DomainError):
    """Evaluation was requested exactly at a non-integrable point."""


class ConfigurationError(PsifdeError, ValueError):
    """A problem configuration is structurally or semantically invalid."""


class ConvergenceError(PsifdeError, RuntimeError):
    """An iteration failed to meet its tolerance within the step budget.

    Carries the last residual and, when available, the history of
    per-iteration deltas so callers can diagnose the failure.
    """

    def __init__(self, message: str, *, residual: float | None = None,
                 history: list[float] | None = None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else []
