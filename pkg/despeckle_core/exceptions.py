from typing import Any, Optional


class DespeckleException(Exception):
    """Base class for all despeckle-core related errors."""

    exit_code: int = 1

    def __init__(
        self,
        message: Optional[str] = None,
        data: Any = None,
        code: Optional[int] = None,
    ):
        self.code = code or self.exit_code
        self.data = data
        if message is not None:
            self.message = message
        super().__init__(message)


class InvalidInputError(DespeckleException):
    """Raised when an argument violates an operation's preconditions."""

    exit_code = 2


class DegenerateInputError(DespeckleException):
    """Raised when the data carries no usable variance (e.g. a zero covariance)."""

    exit_code = 3


class DivergenceError(DespeckleException):
    """Raised when an iterative estimator diverges.

    ``data`` holds ``{"last_stable_w": ndarray, "iteration": int}``.
    """

    exit_code = 4


class NoSignalError(DespeckleException):
    """Raised when an image is constant and cannot be registered."""

    exit_code = 5


class RegistrationFailedError(DespeckleException):
    """Raised when a candidate transform leaves too little overlap to score."""

    exit_code = 6


class UndefinedMetricError(DespeckleException):
    """Raised when an ROI metric has a zero denominator."""

    exit_code = 7


class SelectionAmbiguousError(DespeckleException):
    """Raised when no estimated source correlates with the reference image.

    ``data`` holds the top candidates as ``[(index, correlation), ...]``.
    """

    exit_code = 8


class ConfigError(DespeckleException):
    """Raised for unreadable configuration files or failed validation."""

    exit_code = 9
