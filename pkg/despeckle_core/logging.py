import os
import sys
from typing import Any, Dict, Optional

from loguru import logger
from pydantic import BaseModel, ConfigDict

from despeckle_core.context import get_cell_label

LOG_LEVEL_ENV_VAR = "DESPECKLE_LOG_LEVEL"

TEXT_FORMAT = (
    "<green>{time:YYYYMMDD HH:mm:ss}</green> "
    "| {extra[service]} "
    "| {extra[cell]} "
    "| {thread.name} "
    "| <cyan>{module}</cyan>.<cyan>{function}</cyan> "
    "| <level>{level}</level>: "
    "<level>{message}</level>\n"
)


class LogFileOptions(BaseModel):
    """
    Options of the file sink (the run log).

    Unknown fields are passed through to ``logger.add`` unchanged.
    """

    rotation: str = "10 MB"
    retention: str = "1 week"
    compression: Optional[str] = None
    enqueue: bool = False
    encoding: str = "utf-8"

    model_config = ConfigDict(extra="allow")


def default_log_level(fallback: str = "INFO") -> str:
    """Log level from ``DESPECKLE_LOG_LEVEL``, the only environment coupling of the package."""
    return os.environ.get(LOG_LEVEL_ENV_VAR, fallback).upper()


def _text_format(record) -> str:
    record["extra"].setdefault("cell", "-")
    return TEXT_FORMAT


def _sink_options(options: Dict[str, Any], sink: Any, level: str, json_format: bool) -> Dict[str, Any]:
    # caller-supplied keys win over the defaults below
    options.setdefault("sink", sink)
    options.setdefault("level", level)
    options.setdefault("enqueue", True)
    if json_format:
        options.setdefault("serialize", True)
    else:
        options.setdefault("format", _text_format)
    return options


def setup_loguru(
    level: Optional[str] = None,
    json_format: bool = False,
    service_name: str = "despeckle",
    log_file: Optional[str] = None,
    console_options: Optional[Dict[str, Any]] = None,
    file_options: Optional[LogFileOptions] = None,
):
    """
    Route loguru records to stderr and, optionally, to a run log.

    Every record gets ``extra.service``; records emitted inside ``cell_context`` also get
    ``extra.cell``, shown as ``-`` in text output otherwise.

    Args:
        level: Minimum level of both sinks. Defaults to ``DESPECKLE_LOG_LEVEL`` or INFO.
        json_format: Serialize records as JSON instead of the one-line text format.
        service_name: Value of ``extra.service``.
        log_file: Path of the file sink; no file sink when omitted.
        console_options: Extra ``logger.add`` arguments for the stderr sink (e.g. ``{"enqueue": False}``).
        file_options: Rotation, retention and other arguments of the file sink.
    """
    level = (level or default_log_level()).upper()

    def patcher(record):
        record["extra"]["service"] = service_name
        cell = get_cell_label()
        if cell:
            record["extra"]["cell"] = cell

    logger.remove()
    logger.configure(patcher=patcher)

    logger.add(**_sink_options(dict(console_options or {}), sys.stderr, level, json_format))

    if log_file:
        options = (file_options or LogFileOptions()).model_dump(exclude_none=True)
        logger.add(**_sink_options(options, log_file, level, json_format))
