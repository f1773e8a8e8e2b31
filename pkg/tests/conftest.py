import numpy as np
import pytest

from despeckle_core import Image, make_phantom, setup_loguru

from .utils import textured_image


@pytest.fixture(scope="session", autouse=True)
def quiet_logging():
    """Library debug output (per-sweep, per-frame) would drown the test report."""
    setup_loguru(level="WARNING")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def phantom() -> Image:
    return make_phantom()


@pytest.fixture(scope="session")
def texture() -> Image:
    return textured_image()
