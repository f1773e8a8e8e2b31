"""
JADE: joint approximate diagonalization of fourth-order cumulant matrices.

For whitened data the quadri-covariance of a d x d matrix M is

    C(M) = E{(z̄ᵀ·M·z̄)·z̄·z̄ᵀ} - R·M·R - tr(M·R)·R - R·Mᵀ·R,   R = E{z̄·z̄ᵀ}.
"""

from typing import Optional

import numpy as np
from loguru import logger
from scipy import linalg

from despeckle_core.exceptions import InvalidInputError
from despeckle_core.ica.base import IcaConfig, assemble_result
from despeckle_core.ica.jointdiag import joint_diagonalize
from despeckle_core.ica.preprocessing import MatrixLike, as_matrix, whiten
from despeckle_core.schemas import UnmixingResult

_IDENTIFIABILITY_FACTOR = 10.0


def _second_moment(z: np.ndarray) -> np.ndarray:
    r = z @ z.T / z.shape[1]
    return (r + r.T) / 2.0


def _symmetric(c: np.ndarray) -> np.ndarray:
    return (c + c.T) / 2.0


def quadricov_identity(Z: MatrixLike) -> np.ndarray:
    """``C(I) = E{‖z̄‖²·z̄·z̄ᵀ} - 2R² - tr(R)·R``; zero in expectation for Gaussian data."""
    z = as_matrix(Z)
    r = _second_moment(z)
    norms = (z * z).sum(axis=0)
    c = (z * norms) @ z.T / z.shape[1] - 2.0 * (r @ r) - np.trace(r) * r
    return _symmetric(c)


def quadricov_projected(Z: MatrixLike, E: np.ndarray) -> np.ndarray:
    """
    Quadri-covariance ``C(E)`` of ``z`` for an arbitrary d x d matrix ``E``.

    Raises:
        InvalidInputError: when ``E`` is not d x d.
    """
    z = as_matrix(Z)
    d = z.shape[0]
    e = np.asarray(E, dtype=np.float64)
    if e.shape != (d, d):
        raise InvalidInputError(message=f"E must be {d}x{d}, got {e.shape}")
    r = _second_moment(z)
    proj = ((e @ z) * z).sum(axis=0)
    c = (z * proj) @ z.T / z.shape[1] - r @ e @ r - np.trace(e @ r) * r - r @ e.T @ r
    return _symmetric(c)


def jade(X: MatrixLike, config: Optional[IcaConfig] = None) -> UnmixingResult:
    """
    Whiten, build d cumulant matrices ``C(u_p·u_pᵀ)`` from the eigenvectors of ``C(I)`` and
    jointly diagonalize them. ``W = Uᵀ``.

    Cost grows as ``d³·P`` (building the set) plus ``K·d³`` per sweep.

    Gaussian-only data still yields a result, with a low-identifiability warning attached.

    Raises:
        InvalidInputError: for malformed input.
        DegenerateInputError: for a zero covariance.
    """
    config = config or IcaConfig(algorithm="jade")
    z, whitening = whiten(X, config.drop_tol)
    d, n_samples = z.shape

    c_identity = quadricov_identity(z)
    eigenvalues, vectors = linalg.eigh(c_identity)
    order = np.argsort(-np.abs(eigenvalues), kind="stable")
    vectors = vectors[:, order]

    cumulants = np.array([quadricov_projected(z, np.outer(vectors[:, p], vectors[:, p])) for p in range(d)])
    jd = joint_diagonalize(cumulants, config.angle_tol, config.max_sweeps, config.energy_tol)

    warnings = []
    structure = float(np.abs(cumulants).max())
    noise = np.sqrt(24.0 / n_samples)
    if structure < _IDENTIFIABILITY_FACTOR * noise:
        warnings.append(
            f"low identifiability: cumulants ({structure:.3e}) within sampling noise ({noise:.3e}) of Gaussian"
        )
        logger.warning(f"jade: {warnings[-1]}")

    diagnostics = {
        "sweeps": jd.sweeps,
        "offdiag_energy": jd.energy_history,
        "cumulant_eigenvalues": eigenvalues[order],
    }
    return assemble_result(
        "jade",
        z,
        jd.u.T,
        whitening,
        jd.sweeps,
        jd.converged,
        warnings,
        diagnostics,
        mixing=whitening.q_pinv @ jd.u,
    )
