import numpy as np
import pytest
from scipy import ndimage

from despeckle_core import Image, SpeckleConfig, build_data_matrix, generate_speckle_stack, make_phantom, setup_loguru
from despeckle_core.speckle import log_compress_stack


@pytest.fixture(scope="module", autouse=True)
def silence_logging():
    """Ensure logs don't interfere with performance measurement."""

    setup_loguru(level="WARNING")


@pytest.fixture(scope="module")
def data_matrices() -> dict:
    """Log-compressed phantom data matrices for N = 10 and N = 40 frames."""
    stack, _ = generate_speckle_stack(make_phantom(), SpeckleConfig(looks=4.0, n_frames=40, seed=1))
    compressed, _ = log_compress_stack(stack)
    return {n: build_data_matrix(compressed.first(n)) for n in (10, 40)}


@pytest.fixture(scope="module")
def texture_pair():
    """A smooth 256x256 texture and a copy shifted by (3, -2) pixels."""
    noise = ndimage.gaussian_filter(np.random.default_rng(7).random((256, 256)), 2.0)
    noise = (noise - noise.min()) / (noise.max() - noise.min())
    return Image(pixels=noise), Image(pixels=np.roll(noise, (-2, 3), axis=(0, 1)))
