import math

import numpy as np
import pytest
from scipy import integrate, stats

from despeckle_core import IcaConfig, InvalidInputError
from despeckle_core.ica import amari_index, fastica, negentropy_contrast, whiten
from despeckle_core.ica.fastica import gaussian_expectation

from ..utils import exactly_white, laplacian_sources, random_mixing, random_orthogonal, uniform_sources


@pytest.fixture
def laplacian_mixture(rng):
    sources = laplacian_sources(4, 20000, rng)
    mixing = random_mixing(4, rng)
    return mixing @ sources, mixing


class TestFastIca:
    @pytest.mark.parametrize("mode", ["symmetric", "deflation"])
    @pytest.mark.parametrize("contrast", ["logcosh", "gauss"])
    def test_separates_laplacian_mixture(self, laplacian_mixture, mode, contrast):
        x, mixing = laplacian_mixture
        z, whitening = whiten(x)

        result = fastica(z, IcaConfig(fastica_mode=mode, contrast=contrast, seed=3), whitening=whitening)

        assert result.converged
        assert result.iterations <= 512
        assert amari_index(result.w_total, mixing) < 0.05

    def test_orthogonal_mixing_of_white_sources(self, rng):
        sources = exactly_white(laplacian_sources(4, 20000, rng))
        mixing = random_orthogonal(4, rng)

        result = fastica(mixing @ sources, IcaConfig(seed=1))

        assert amari_index(result.w_total, mixing) < 0.05
        assert np.abs(result.w.T @ result.w - np.eye(4)).max() < 1e-8

    def test_converges_immediately_from_the_solution(self, rng):
        perm = np.eye(3)[[1, 2, 0]] * np.array([1.0, -1.0, 1.0])[:, None]
        z = perm @ exactly_white(laplacian_sources(3, 20000, rng))

        result = fastica(z, IcaConfig(tol=1e-4), w_init=perm.T)

        assert result.converged
        assert result.iterations <= 3

    def test_gaussian_sources_do_not_raise(self, rng):
        z, whitening = whiten(rng.standard_normal((3, 5000)))
        result = fastica(z, IcaConfig(max_iters=50), whitening=whitening)

        assert result.sources.shape == (3, 5000)
        assert result.diagnostics["negentropy"].shape == (3,)

    def test_deterministic_for_a_seed(self, laplacian_mixture):
        z, whitening = whiten(laplacian_mixture[0])
        first = fastica(z, IcaConfig(seed=42), whitening=whitening)
        second = fastica(z, IcaConfig(seed=42), whitening=whitening)

        np.testing.assert_array_equal(first.w, second.w)
        np.testing.assert_array_equal(first.sources, second.sources)
        assert first.iterations == second.iterations

    def test_result_shapes(self, laplacian_mixture):
        x, _ = laplacian_mixture
        z, whitening = whiten(x)
        result = fastica(z, IcaConfig(), whitening=whitening)

        assert result.algorithm == "fastica"
        assert result.w.shape == (4, 4)
        assert result.w_total.shape == (4, 4)
        assert result.mixing.shape == (4, 4)
        np.testing.assert_allclose(result.w_total @ result.mixing, np.eye(4), atol=1e-8)
        np.testing.assert_allclose(result.means, x.mean(axis=1))
        assert result.diagnostics["mode"] == "symmetric"

    def test_bad_w_init(self, rng):
        with pytest.raises(InvalidInputError):
            fastica(rng.standard_normal((3, 100)), w_init=np.eye(2))


class TestNegentropy:
    def test_gaussian_expectations(self):
        assert gaussian_expectation("logcosh") == pytest.approx(0.3746, abs=1e-4)
        assert gaussian_expectation("gauss") == pytest.approx(-1.0 / math.sqrt(2.0), abs=1e-8)

    def test_gaussian_signal_is_near_zero(self, rng):
        assert negentropy_contrast(rng.standard_normal(100000)) < 1e-3

    def test_uniform_matches_quadrature(self):
        half_width = math.sqrt(3.0)
        y = np.linspace(-half_width, half_width, 100000)
        y /= y.std()

        density = stats.uniform(loc=-half_width, scale=2 * half_width).pdf
        expected_g, _ = integrate.quad(lambda u: math.log(math.cosh(u)) * density(u), -half_width, half_width)
        expected = (expected_g - gaussian_expectation("logcosh")) ** 2

        assert negentropy_contrast(y, "logcosh") == pytest.approx(expected, rel=0.1)

    @pytest.mark.parametrize("contrast", ["logcosh", "gauss"])
    def test_laplacian_exceeds_gaussian(self, rng, contrast):
        laplacian = laplacian_sources(1, 100000, rng)[0]
        gaussian = rng.standard_normal(100000)
        assert negentropy_contrast(laplacian, contrast) > 0
        assert negentropy_contrast(laplacian, contrast) > negentropy_contrast(gaussian, contrast)

    def test_uniform_has_positive_negentropy(self, rng):
        assert negentropy_contrast(uniform_sources(1, 100000, rng)[0], "gauss", 1.0) > 1e-4

    @pytest.mark.parametrize(
        "y, kwargs",
        [
            (np.full(1000, 3.0), {}),
            (np.array([]), {}),
            (np.array([1.0, -1.0, np.nan]), {}),
            (np.array([1.0, -1.0] * 50), {"a1": 2.5}),
            (np.array([1.0, -1.0] * 50), {"contrast": "cube"}),
        ],
    )
    def test_invalid_input(self, y, kwargs):
        with pytest.raises(InvalidInputError):
            negentropy_contrast(y, **kwargs)

    def test_variance_outside_unit_band(self, rng):
        with pytest.raises(InvalidInputError) as exc_info:
            negentropy_contrast(2.0 * rng.standard_normal(1000))
        assert exc_info.value.data["variance"] > 1.1
