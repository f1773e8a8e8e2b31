"""Shared fixtures for despeckle CLI tests."""

import pytest
from click.testing import CliRunner

from despeckle_core import setup_loguru

RUN_INI = """
[phantom]
n_frames = 5

[run]
algorithms = median, sobi
subset_sizes = 5
write_images = false
"""


@pytest.fixture
def cli_runner():
    """Provide a CliRunner instance for CLI tests."""
    return CliRunner()


@pytest.fixture(autouse=True)
def restore_logging():
    """Commands point loguru at the runner's streams; put the quiet test sinks back afterwards."""
    yield
    setup_loguru(level="WARNING")


@pytest.fixture
def run_ini(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(RUN_INI, encoding="utf-8")
    return path
