"""Centering, covariance estimation, whitening and lagged covariance.

Every estimator in :mod:`despeckle_core.ica` runs on data prepared here. Covariances use the
population normalization 1/P throughout.
"""

from typing import Tuple, Union

import numpy as np
from loguru import logger
from scipy import linalg

from despeckle_core.exceptions import DegenerateInputError, InvalidInputError
from despeckle_core.schemas import DataMatrix, WhiteningResult

MatrixLike = Union[DataMatrix, np.ndarray]

DEFAULT_DROP_TOL = 1e-12
# Below this the covariance is treated as numerically zero.
_ZERO_EIGENVALUE = 1e-300


def as_matrix(X: MatrixLike) -> np.ndarray:
    """Return the float64 N x P array behind ``X``, validating shape and finiteness."""
    if isinstance(X, DataMatrix):
        return X.values
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(message=f"Expected a 2-D matrix, got shape {arr.shape}", data={"shape": arr.shape})
    if not np.isfinite(arr).all():
        raise InvalidInputError(message="Matrix contains non-finite entries")
    return arr


def center(X: MatrixLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    Subtract each row's mean.

    Returns:
        ``(Xc, means)`` with ``Xc + means[:, None]`` reproducing ``X``.

    Raises:
        InvalidInputError: on non-finite entries.
    """
    values = as_matrix(X)
    means = values.mean(axis=1)
    return values - means[:, None], means


def covariance(Xc: MatrixLike) -> np.ndarray:
    """
    Sample covariance ``(1/P)·Xc·Xcᵀ`` of centered data, exactly symmetric.

    Raises:
        InvalidInputError: if there are no samples.
    """
    values = as_matrix(Xc)
    n_samples = values.shape[1]
    if n_samples == 0:
        raise InvalidInputError(message="Covariance needs at least one sample")
    c = values @ values.T / n_samples
    return (c + c.T) / 2.0


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each column made positive
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def whiten(X: MatrixLike, drop_tol: float = DEFAULT_DROP_TOL) -> Tuple[np.ndarray, WhiteningResult]:
    """
    Eigendecomposition whitening.

    Eigenpairs with ``λ <= drop_tol·λ_max`` are discarded, so near-collinear stacks whiten to a
    lower dimension ``d``. ``Q = Λ^(-1/2)·Eᵀ`` over the retained pairs.

    Returns:
        ``(Z, whitening)`` where ``Z = Q·(X - means)`` is d x P with identity covariance.

    Raises:
        InvalidInputError: for ``drop_tol`` outside (0, 1) or non-finite data.
        DegenerateInputError: when the covariance is numerically zero.
    """
    if not 0.0 < drop_tol < 1.0:
        raise InvalidInputError(message=f"drop_tol must lie in (0, 1), got {drop_tol}")

    Xc, means = center(X)
    c = covariance(Xc)
    eigenvalues, eigenvectors = linalg.eigh(c)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]

    lam_max = eigenvalues[0]
    if lam_max < _ZERO_EIGENVALUE:
        raise DegenerateInputError(message="Covariance is numerically zero; nothing to whiten")

    keep = eigenvalues > drop_tol * lam_max
    kept_values = eigenvalues[keep]
    kept_vectors = _fix_signs(eigenvectors[:, keep])
    d = int(keep.sum())
    if d < len(eigenvalues):
        logger.debug(f"whiten: dropped {len(eigenvalues) - d} of {len(eigenvalues)} eigenpairs (rank deficiency)")

    q = (kept_vectors / np.sqrt(kept_values)).T
    q_pinv = kept_vectors * np.sqrt(kept_values)
    z = q @ Xc

    result = WhiteningResult(q=q, q_pinv=q_pinv, means=means, retained_dim=d, eigenvalues=eigenvalues)
    return z, result


def lagged_covariance(Z: MatrixLike, p: int) -> np.ndarray:
    """
    Symmetrized lagged covariance ``(R̂(p) + R̂(p)ᵀ)/2`` with
    ``R̂(p) = (1/(P-p))·Σ_t z(t)·z(t-p)ᵀ``.

    Raises:
        InvalidInputError: unless ``0 <= p < P``.
    """
    values = as_matrix(Z)
    n_samples = values.shape[1]
    if not 0 <= p < n_samples:
        raise InvalidInputError(message=f"Lag {p} must satisfy 0 <= p < {n_samples}")
    r = values[:, p:] @ values[:, : n_samples - p].T / (n_samples - p)
    return (r + r.T) / 2.0
