import numpy as np
import pytest

from despeckle_core import DataMatrix, DegenerateInputError, InvalidInputError
from despeckle_core.ica import center, covariance, lagged_covariance, whiten


class TestCenter:
    def test_arithmetic(self):
        xc, means = center(np.array([[1.0, 3.0], [2.0, 2.0]]))
        np.testing.assert_array_equal(xc, [[-1.0, 1.0], [0.0, 0.0]])
        np.testing.assert_array_equal(means, [2.0, 2.0])

    def test_zero_mean_rows_unchanged(self):
        x = np.array([[1.0, -1.0, 0.0], [2.0, 0.0, -2.0]])
        xc, means = center(x)
        np.testing.assert_array_equal(xc, x)
        np.testing.assert_array_equal(means, [0.0, 0.0])

    def test_random_rows_are_centered_and_reproducible(self, rng):
        x = DataMatrix(values=rng.normal(3.0, 2.0, size=(5, 1000)))
        xc, means = center(x)
        assert np.abs(xc.mean(axis=1)).max() < 1e-12
        np.testing.assert_allclose(xc + means[:, None], x.values, atol=1e-12)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            center(np.array([[1.0, np.nan], [0.0, 1.0]]))

    def test_data_matrix_validates_shape(self):
        with pytest.raises(InvalidInputError):
            DataMatrix(values=np.ones((3, 2)))
        with pytest.raises(InvalidInputError):
            DataMatrix(values=np.ones((1, 10)))


class TestCovariance:
    def test_arithmetic(self):
        np.testing.assert_array_equal(covariance(np.array([[1.0, -1.0], [1.0, -1.0]])), [[1.0, 1.0], [1.0, 1.0]])

    def test_orthogonal_rows(self):
        c = covariance(np.array([[1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0]]))
        assert abs(c[0, 1]) < 1e-12
        np.testing.assert_array_equal(c, c.T)

    def test_independent_noise_near_identity(self, rng):
        xc, _ = center(rng.standard_normal((3, 10000)))
        c = covariance(xc)
        assert np.abs(c - np.eye(3)).max() < 0.05
        assert np.linalg.eigvalsh(c).min() >= 0

    def test_no_samples(self):
        with pytest.raises(InvalidInputError):
            covariance(np.zeros((2, 0)))


class TestWhiten:
    def test_diagonal_covariance(self):
        x = np.array([[2.0, -2.0, 2.0, -2.0], [1.0, 1.0, -1.0, -1.0]])
        z, w = whiten(x)
        assert w.retained_dim == 2
        np.testing.assert_allclose(np.abs(w.q), np.diag([0.5, 1.0]), atol=1e-12)
        np.testing.assert_allclose(w.eigenvalues, [4.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(z @ z.T / 4, np.eye(2), atol=1e-12)

    def test_rank_deficient_stack(self, rng):
        row = rng.standard_normal(500)
        z, w = whiten(np.vstack([row, 2.0 * row, -0.5 * row]))
        assert w.retained_dim == 1
        assert z.shape == (1, 500)
        assert w.q.shape == (1, 3)
        assert w.q_pinv.shape == (3, 1)
        assert len(w.eigenvalues) == 3

    def test_random_matrix(self, rng):
        x = rng.standard_normal((6, 6)) @ rng.standard_normal((6, 5000)) + rng.normal(size=(6, 1))
        z, w = whiten(x)
        xc, _ = center(x)

        assert w.retained_dim == 6
        assert np.abs(z @ z.T / z.shape[1] - np.eye(6)).max() < 1e-8
        assert np.abs(w.q @ w.q_pinv - np.eye(6)).max() < 1e-8
        assert np.linalg.norm(w.q_pinv @ z - xc) / np.linalg.norm(xc) < 1e-6
        assert np.all(np.diff(w.eigenvalues) <= 0)

    @pytest.mark.parametrize("seed", range(20))
    def test_identity_covariance_property(self, seed):
        gen = np.random.default_rng(seed)
        n = int(gen.integers(2, 21))
        x = gen.standard_normal((n, n)) @ gen.standard_normal((n, 10 * n * n))
        z, _ = whiten(x)
        assert np.abs(z @ z.T / z.shape[1] - np.eye(z.shape[0])).max() < 1e-8

    def test_zero_covariance(self):
        with pytest.raises(DegenerateInputError):
            whiten(np.ones((3, 50)))

    @pytest.mark.parametrize("drop_tol", [0.0, 1.0, -1e-3])
    def test_drop_tol_range(self, rng, drop_tol):
        with pytest.raises(InvalidInputError):
            whiten(rng.standard_normal((2, 100)), drop_tol)


class TestLaggedCovariance:
    def test_lag_zero_on_whitened_data(self, rng):
        z, _ = whiten(rng.standard_normal((4, 2000)))
        assert np.abs(lagged_covariance(z, 0) - np.eye(4)).max() < 1e-8

    def test_white_rows_have_no_lagged_structure(self, rng):
        z = rng.standard_normal((3, 100000))
        assert np.abs(lagged_covariance(z, 5)).max() < 0.05

    def test_sinusoid_at_its_period(self):
        period = 25
        t = np.arange(10000)
        z = np.sqrt(2.0) * np.sin(2.0 * np.pi * t / period)[None, :]
        assert abs(lagged_covariance(z, period)[0, 0] - lagged_covariance(z, 0)[0, 0]) < 0.05

    def test_symmetric(self, rng):
        z = rng.standard_normal((3, 500))
        z[1, 1:] += z[0, :-1]
        r = lagged_covariance(z, 1)
        np.testing.assert_array_equal(r, r.T)
        assert r[0, 1] > 0.2

    @pytest.mark.parametrize("lag", [-1, 100, 101])
    def test_lag_out_of_range(self, rng, lag):
        with pytest.raises(InvalidInputError):
            lagged_covariance(rng.standard_normal((2, 100)), lag)
