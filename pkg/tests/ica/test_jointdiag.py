import math

import numpy as np
import pytest

from despeckle_core import InvalidInputError
from despeckle_core.ica import joint_diagonalize, offdiag_energy


def rotation(degrees: float) -> np.ndarray:
    t = math.radians(degrees)
    return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])


def random_symmetric(d: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((d, d))
    return (a + a.T) / 2.0


def nearly_commuting_set(d: int, k: int, rng: np.random.Generator, noise: float = 1e-3) -> np.ndarray:
    v, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return np.array([v @ np.diag(rng.uniform(-3, 3, d)) @ v.T + noise * random_symmetric(d, rng) for _ in range(k)])


def assert_signed_permutation(m: np.ndarray, atol: float) -> None:
    a = np.abs(m)
    np.testing.assert_allclose(np.sort(a, axis=1)[:, -1], 1.0, atol=atol)
    np.testing.assert_allclose(a.sum(axis=0), 1.0, atol=atol * a.shape[0])


class TestOffdiagEnergy:
    def test_diagonal_matrix(self):
        assert offdiag_energy([np.diag([1.0, 2.0])], np.eye(2)) == 0.0

    def test_arithmetic(self):
        assert offdiag_energy([np.array([[0.0, 1.0], [1.0, 0.0]])], np.eye(2)) == pytest.approx(2.0)

    def test_rotation_diagonalizes_exchange_matrix(self):
        assert offdiag_energy([np.array([[0.0, 1.0], [1.0, 0.0]])], rotation(45.0)) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            offdiag_energy([np.eye(3)], np.eye(2))

    def test_non_orthogonal_u(self):
        with pytest.raises(InvalidInputError):
            offdiag_energy([np.eye(2)], np.array([[1.0, 0.1], [0.0, 1.0]]))


class TestJointDiagonalize:
    def test_commuting_pair(self):
        v = rotation(30.0)
        matrices = [v @ np.diag([1.0, 2.0]) @ v.T, v @ np.diag([3.0, 1.0]) @ v.T]

        jd = joint_diagonalize(matrices)

        assert jd.converged
        assert offdiag_energy(matrices, jd.u) < 1e-10
        assert_signed_permutation(jd.u.T @ v, atol=1e-8)

    def test_single_matrix_matches_eigendecomposition(self, rng):
        m = random_symmetric(5, rng)
        jd = joint_diagonalize([m])

        eigenvalues, eigenvectors = np.linalg.eigh(m)
        np.testing.assert_allclose(np.sort(np.diag(jd.u.T @ m @ jd.u)), eigenvalues, atol=1e-8)
        assert_signed_permutation(jd.u.T @ eigenvectors, atol=1e-6)

    def test_isotropic_set_converges_at_first_sweep(self):
        jd = joint_diagonalize([np.eye(3)])
        assert jd.converged
        assert jd.sweeps == 1
        np.testing.assert_array_equal(jd.u, np.eye(3))

    def test_energy_never_increases(self, rng):
        matrices = [random_symmetric(4, rng) for _ in range(5)]
        jd = joint_diagonalize(matrices)

        history = np.array(jd.energy_history)
        assert len(history) == jd.sweeps + 1
        assert np.all(np.diff(history) <= 1e-12 * history[0])
        assert offdiag_energy(matrices, jd.u) <= offdiag_energy(matrices, np.eye(4))

    def test_u_is_orthogonal(self, rng):
        jd = joint_diagonalize(nearly_commuting_set(6, 4, rng))
        assert np.abs(jd.u.T @ jd.u - np.eye(6)).max() < 1e-8

    def test_signed_permutation_invariance(self, rng):
        matrices = nearly_commuting_set(4, 3, rng)
        perm = np.eye(4)[[2, 0, 3, 1]] * np.array([1.0, -1.0, -1.0, 1.0])[:, None]
        permuted = [perm @ m @ perm.T for m in matrices]

        direct = joint_diagonalize(matrices)
        other = joint_diagonalize(permuted)

        assert offdiag_energy(permuted, other.u) == pytest.approx(offdiag_energy(matrices, direct.u), abs=1e-10)

    def test_stops_at_max_sweeps(self, rng):
        matrices = [random_symmetric(6, rng) for _ in range(8)]
        jd = joint_diagonalize(matrices, angle_tol=1e-300, max_sweeps=2)
        assert jd.sweeps == 2
        assert not jd.converged

    def test_exchange_matrix_gets_quarter_turn(self):
        exchange = np.array([[0.0, 1.0], [1.0, 0.0]])
        jd = joint_diagonalize([exchange])

        assert jd.converged
        assert offdiag_energy([exchange], jd.u) < 1e-12
        np.testing.assert_allclose(np.abs(jd.u), 1.0 / math.sqrt(2.0), atol=1e-12)

    def test_equal_diagonal_block(self):
        m = np.array([[2.0, 0.5, 0.0], [0.5, 2.0, 0.0], [0.0, 0.0, 1.0]])
        jd = joint_diagonalize([m])

        assert offdiag_energy([m], jd.u) < 1e-12
        np.testing.assert_allclose(np.sort(np.diag(jd.u.T @ m @ jd.u)), [1.0, 1.5, 2.5], atol=1e-12)

    @pytest.mark.parametrize("max_sweeps", [1, 2, 3, 4, 5])
    def test_u_stays_orthogonal_after_every_sweep(self, rng, max_sweeps):
        matrices = [random_symmetric(5, rng) for _ in range(6)]
        jd = joint_diagonalize(matrices, angle_tol=1e-300, max_sweeps=max_sweeps)
        assert np.abs(jd.u.T @ jd.u - np.eye(5)).max() < 1e-12

    @pytest.mark.parametrize("case", range(50))
    def test_recovers_common_eigenbasis(self, case):
        rng = np.random.default_rng(1000 + case)
        d, k = int(rng.integers(2, 11)), int(rng.integers(2, 21))
        v, _ = np.linalg.qr(rng.standard_normal((d, d)))
        matrices = [v @ np.diag(rng.uniform(-3, 3, d)) @ v.T for _ in range(k)]

        jd = joint_diagonalize(matrices)

        assert offdiag_energy(matrices, jd.u) < 1e-10
        assert_signed_permutation(jd.u.T @ v, atol=1e-6)

    def test_stops_on_energy_plateau(self, rng):
        matrices = nearly_commuting_set(4, 5, rng)

        settled = joint_diagonalize(matrices, angle_tol=1e-300, max_sweeps=1000)
        reference = joint_diagonalize(matrices)

        assert settled.converged
        assert settled.sweeps < 1000
        assert offdiag_energy(matrices, settled.u) == pytest.approx(offdiag_energy(matrices, reference.u), abs=1e-10)

    def test_energy_tol_zero_runs_to_max_sweeps(self, rng):
        matrices = [random_symmetric(6, rng) for _ in range(8)]
        jd = joint_diagonalize(matrices, angle_tol=1e-300, max_sweeps=3, energy_tol=0.0)
        assert jd.sweeps == 3

    @pytest.mark.parametrize(
        "matrices",
        [
            [np.array([[1.0, 2.0], [0.0, 1.0]])],
            [np.eye(2), np.eye(3)],
            [np.ones((2, 3))],
            [],
            [np.array([[np.inf, 0.0], [0.0, 1.0]])],
        ],
    )
    def test_invalid_sets(self, matrices):
        with pytest.raises(InvalidInputError):
            joint_diagonalize(matrices)

    @pytest.mark.parametrize(
        "angle_tol, max_sweeps, energy_tol", [(0.0, 10, 1e-12), (-1.0, 10, 1e-12), (1e-8, 0, 1e-12), (1e-8, 10, -1.0)]
    )
    def test_invalid_parameters(self, angle_tol, max_sweeps, energy_tol):
        with pytest.raises(InvalidInputError):
            joint_diagonalize([np.eye(2)], angle_tol, max_sweeps, energy_tol)
