"""Exception-to-exit-code mapping for the ``despeckle`` console script."""

import functools
from typing import Any, Callable

import click
from loguru import logger

from despeckle_core.exceptions import (
    ConfigError,
    DegenerateInputError,
    DespeckleException,
    DivergenceError,
    InvalidInputError,
    NoSignalError,
    RegistrationFailedError,
    SelectionAmbiguousError,
    UndefinedMetricError,
)


def describe_exception(exc: DespeckleException) -> str:
    """One-line user-facing message for a library error."""
    match exc:
        case ConfigError():
            prefix = "configuration error"
        case InvalidInputError():
            prefix = "invalid input"
        case DegenerateInputError():
            prefix = "degenerate data"
        case DivergenceError():
            prefix = "estimator diverged"
        case NoSignalError() | RegistrationFailedError():
            prefix = "registration failed"
        case UndefinedMetricError():
            prefix = "metric undefined"
        case SelectionAmbiguousError():
            prefix = "no signal component"
        case _:
            prefix = "error"
    return f"{prefix}: {exc}"


def handle_exception(exc: DespeckleException) -> int:
    """Report ``exc`` on stderr and return the exit code of its class."""
    logger.debug(f"{type(exc).__name__} data: {exc.data!r}")
    click.echo(describe_exception(exc), err=True)
    return exc.code


def reports_errors(func: Callable[..., Any]) -> Callable[..., Any]:
    """Turn library errors raised by a command into a message and a non-zero exit code."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except DespeckleException as exc:
            raise SystemExit(handle_exception(exc)) from exc

    return wrapper
