"""Exception types raised across the package."""

from __future__ import annotations


class CredrjError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(CredrjError, ValueError):
    """Parameter shapes do not agree with the panel or the model layout."""


class DomainError(CredrjError, ValueError):
    """A value lies outside the support of a density or a parameter space."""


class DataError(CredrjError, ValueError):
    """Malformed input data (CSV ingestion, configuration files)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonFiniteError(CredrjError, FloatingPointError):
    """A sampler produced a non-finite density; ``state`` holds the offending draw."""

    def __init__(self, message: str, state: dict | None = None):
        self.state = state or {}
        if state:
            dump = ", ".join(f"{k}={v!r}" for k, v in self.state.items())
            message = f"{message} [state: {dump}]"
        super().__init__(message)


class ProposalError(CredrjError, ArithmeticError):
    """A Gaussian proposal could not be factorized (precision not positive definite)."""
