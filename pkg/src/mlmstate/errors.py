"""Semantic exception hierarchy. CLI exit codes map onto these classes."""

from __future__ import annotations


class MlmError(Exception):
    """Base error for this package."""


class DomainError(MlmError, ValueError):
    """A point lies outside the admissible domain of an operation."""


class InputError(MlmError, ValueError):
    """User-supplied data or configuration violates its contract."""


class SizeLimitError(InputError):
    """An oracle instance exceeds the desk-scale size limits."""


class ConvergenceError(MlmError, RuntimeError):
    """A solve did not reach the requested tolerance."""


class UnsupportedCostError(MlmError, ValueError):
    """The requested operation needs a cost kind other than the one supplied."""


class VerificationError(MlmError, AssertionError):
    """A cross-check between independent computations failed."""


class InternalError(MlmError, RuntimeError):
    """An internal consistency guarantee was violated (likely a bug upstream)."""
