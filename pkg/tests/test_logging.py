import json

from loguru import logger

from despeckle_core.context import cell_context
from despeckle_core.logging import LogFileOptions, default_log_level, setup_loguru
from despeckle_core.timing import Stopwatch


def test_setup_loguru_file_output(tmp_path):
    log_file = tmp_path / "run.log"

    setup_loguru(level="DEBUG", json_format=False, log_file=str(log_file), service_name="test-service")

    with cell_context("jade/n=25"):
        logger.info("Test file logging message")
    logger.complete()
    logger.remove()

    content = log_file.read_text(encoding="utf-8")
    assert "Test file logging message" in content
    assert "jade/n=25" in content
    assert "test-service" in content


def test_setup_loguru_text_without_cell_uses_placeholder(tmp_path):
    log_file = tmp_path / "plain.log"

    setup_loguru(level="INFO", log_file=str(log_file))
    logger.info("outside any cell")
    logger.complete()
    logger.remove()

    line = log_file.read_text(encoding="utf-8").strip()
    assert "| despeckle | - |" in line
    assert line.endswith("outside any cell")


def test_setup_loguru_json_file_output_with_options(tmp_path):
    log_file = tmp_path / "run.json.log"
    options = LogFileOptions(rotation="1 KB", enqueue=True, encoding="utf-8")

    setup_loguru(level="DEBUG", json_format=True, log_file=str(log_file), service_name="json-service",
                 file_options=options)
    with cell_context("sobi/n=5"):
        logger.info("Test JSON file logging")
    logger.complete()
    logger.remove()

    record = json.loads(log_file.read_text(encoding="utf-8").splitlines()[0])["record"]
    assert record["message"] == "Test JSON file logging"
    assert record["extra"]["service"] == "json-service"
    assert record["extra"]["cell"] == "sobi/n=5"


def test_setup_loguru_level_filters_file(tmp_path):
    log_file = tmp_path / "warn.log"

    setup_loguru(level="WARNING", log_file=str(log_file))
    logger.info("hidden")
    logger.warning("shown")
    logger.complete()
    logger.remove()

    content = log_file.read_text(encoding="utf-8")
    assert "shown" in content
    assert "hidden" not in content


def test_log_file_options_allow_extra():
    options = LogFileOptions(delay=True)
    dumped = options.model_dump(exclude_none=True)
    assert dumped["delay"] is True
    assert dumped["rotation"] == "10 MB"
    assert "compression" not in dumped


def test_default_log_level_from_environment(monkeypatch):
    monkeypatch.setenv("DESPECKLE_LOG_LEVEL", "debug")
    assert default_log_level() == "DEBUG"
    monkeypatch.delenv("DESPECKLE_LOG_LEVEL")
    assert default_log_level() == "INFO"
    assert default_log_level("error") == "ERROR"


def test_stopwatch_logs_elapsed():
    records = []
    handler_id = logger.add(records.append, level="DEBUG", format="{message}")
    try:
        with Stopwatch("jade") as sw:
            sum(range(1000))
    finally:
        logger.remove(handler_id)

    assert sw.elapsed > 0
    assert any(str(r).startswith("jade - ") for r in records)
