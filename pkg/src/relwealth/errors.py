"""Exception hierarchy.

The CLI maps these onto exit codes: validation failures exit 1, numerical
(conditioning) failures exit 2, and schema / I/O problems exit 3.
"""

from __future__ import annotations


class RelWealthError(Exception):
    """Base class for every error raised by this package."""


class StructuralError(RelWealthError, ValueError):
    """Inputs are malformed: wrong shapes or mismatched dimensions."""


class ParameterError(RelWealthError, ValueError):
    """A scalar parameter is outside its admissible range."""


class DomainError(RelWealthError, ValueError):
    """A function was evaluated outside its domain (e.g. nonpositive wealth)."""


class ValidationError(RelWealthError):
    """A model failed its mathematical checks.

    ``report`` is the :class:`~relwealth.model.ValidationReport` that
    triggered the failure, when one is available.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class FactorizationError(ValidationError):
    """Cholesky factorization hit a nonpositive pivot."""

    def __init__(self, index: int, pivot: float):
        super().__init__(
            f"matrix is not positive definite: pivot {index} equals {pivot!r}"
        )
        self.index = index
        self.pivot = pivot


class EstimationError(ValidationError):
    """Moments estimated from data do not form a valid market model.

    The raw estimates are attached so callers can inspect them.
    """

    def __init__(self, message: str, report=None, drift=None, covariance=None):
        super().__init__(message, report)
        self.drift = drift
        self.covariance = covariance


class ConditioningError(RelWealthError):
    """A linear solve is too ill-conditioned for the requested accuracy."""


class SchemaError(RelWealthError):
    """A problem file is unparseable or violates the schema.

    ``errors`` is a list of ``(field_path, message)`` pairs.
    """

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        lines = "; ".join(f"{path}: {msg}" for path, msg in self.errors)
        super().__init__(lines or "schema error")


class DimensionError(SchemaError):
    """Problem-file sections disagree about the number of assets or benchmarks."""
