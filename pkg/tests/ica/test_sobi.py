import numpy as np
import pytest
from scipy import signal

from despeckle_core import IcaConfig, InvalidInputError
from despeckle_core.ica import amari_index, sobi

from ..utils import correlation_matrix, random_mixing


def ar1(coefficient: float, n: int, rng: np.random.Generator) -> np.ndarray:
    return signal.lfilter([1.0], [1.0, -coefficient], rng.standard_normal(n))


class TestSobi:
    def test_recovers_sinusoids(self):
        t = np.arange(10000)
        sources = np.vstack([np.sin(2 * np.pi * t / 20), np.sin(2 * np.pi * t / 7)])
        mixing = np.array([[1.0, 0.5], [0.3, 1.0]])

        result = sobi(mixing @ sources, IcaConfig(algorithm="sobi"))

        corr = correlation_matrix(result.sources, sources)
        assert corr.max(axis=0).min() > 0.95
        assert amari_index(result.w_total, mixing) < 0.05

    def test_separates_ar1_sources(self, rng):
        sources = np.vstack([ar1(0.9, 20000, rng), ar1(-0.5, 20000, rng)])
        mixing = random_mixing(2, rng)

        result = sobi(mixing @ sources, IcaConfig(algorithm="sobi"))

        assert result.converged
        assert not result.warnings
        assert amari_index(result.w_total, mixing) < 0.1

    def test_four_spectrally_distinct_sources(self, rng):
        t = np.arange(30000)
        sources = np.vstack(
            [
                ar1(0.95, 30000, rng),
                ar1(-0.7, 30000, rng),
                np.sin(2 * np.pi * t / 13) + 0.1 * rng.standard_normal(30000),
                np.sin(2 * np.pi * t / 31) + 0.1 * rng.standard_normal(30000),
            ]
        )
        mixing = random_mixing(4, rng)

        result = sobi(mixing @ sources, IcaConfig(algorithm="sobi", lags=list(range(1, 11))))

        assert amari_index(result.w_total, mixing) < 0.1

    def test_white_sources_are_not_separable(self, rng):
        result = sobi(rng.standard_normal((2, 20000)), IcaConfig(algorithm="sobi"))

        assert not result.converged
        assert any("non-separable" in w for w in result.warnings)

    def test_sources_are_uncorrelated(self, rng):
        sources = np.vstack([ar1(0.8, 5000, rng), ar1(0.2, 5000, rng), ar1(-0.6, 5000, rng)])
        result = sobi(random_mixing(3, rng) @ sources)

        assert result.sources.shape == (3, 5000)
        cov = result.sources @ result.sources.T / result.sources.shape[1]
        assert np.abs(cov - np.eye(3)).max() < 1e-8

    def test_mixing_estimate_inverts_unmixing(self, rng):
        sources = np.vstack([ar1(0.9, 5000, rng), ar1(-0.5, 5000, rng)])
        result = sobi(random_mixing(2, rng) @ sources)

        np.testing.assert_allclose(result.w_total @ result.mixing, np.eye(2), atol=1e-8)
        assert result.diagnostics["lags"] == list(range(1, 11))
        history = np.array(result.diagnostics["offdiag_energy"])
        assert np.all(np.diff(history) <= 1e-12 * history[0])

    def test_largest_lag_must_be_below_sample_count(self, rng):
        with pytest.raises(InvalidInputError):
            sobi(rng.standard_normal((2, 10)), IcaConfig(algorithm="sobi"))
