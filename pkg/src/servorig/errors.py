"""Exception types shared across the package."""


class ServorigError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ServorigError):
    """Invalid or incomplete configuration (missing column, bad key, ...)."""


class InsufficientDataError(ServorigError, ValueError):
    """Too few observations for the requested statistic."""


class DomainError(ServorigError, ValueError):
    """Argument outside the mathematical domain of a function."""


class CommandRejected(ServorigError, ValueError):
    """Servo command outside the mechanical range."""


class CalibrationIncomplete(ServorigError):
    """First-pass log does not cover every scheduled position."""

    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"no first-pass reading for positions {self.missing}")


class SamplingDensityError(ServorigError, AssertionError):
    """Shaft trajectory skipped an encoder edge between two samples."""


class SingularMatrixError(ServorigError, ValueError):
    """Covariance matrix of difference scores is not invertible."""
