"""Exception types shared across the package."""


class SegoBenchError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SegoBenchError):
    """An input lies outside the domain it must belong to."""


class EvaluationError(SegoBenchError):
    """An objective or constraint evaluator produced a non-finite value.

    Carries the offending point so callers can decide on a retry or abort
    policy.
    """

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = None if x is None else list(map(float, x))


class ConfigError(SegoBenchError):
    """Invalid configuration value or combination of values."""


class FitError(SegoBenchError):
    """Surrogate model fitting failed beyond recovery."""


class ReportError(SegoBenchError):
    """A report cannot be built from the given traces."""


class ChainError(SegoBenchError):
    """A chained experiment could not obtain a warm-start design."""
