"""Orthogonal joint approximate diagonalization by Jacobi (Givens) sweeps.

Shared by SOBI (lagged covariances) and JADE (quadri-covariance matrices). Real symmetric
matrices only.
"""

import math
from typing import Sequence, Union

import numpy as np
from loguru import logger

from despeckle_core.exceptions import InvalidInputError
from despeckle_core.schemas import JointDiagonalization

DEFAULT_ANGLE_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 100
DEFAULT_ENERGY_TOL = 1e-12
_SYMMETRY_TOL = 1e-10
_ORTHOGONALITY_TOL = 1e-8

MatrixSetLike = Union[np.ndarray, Sequence[np.ndarray]]


def as_matrix_set(matrices: MatrixSetLike) -> np.ndarray:
    """
    Stack a set of K symmetric d x d matrices into a K x d x d array.

    Raises:
        InvalidInputError: for an empty set, mismatched/non-square shapes or asymmetry beyond 1e-10
        (relative to the largest entry when that exceeds 1).
    """
    try:
        stack = np.array([np.asarray(m, dtype=np.float64) for m in matrices])
    except ValueError as e:
        raise InvalidInputError(message="Matrices in a set must share one dimension") from e
    if stack.ndim != 3 or stack.shape[0] < 1 or stack.shape[1] != stack.shape[2]:
        raise InvalidInputError(message=f"Expected K >= 1 square matrices, got shape {stack.shape}")
    if not np.isfinite(stack).all():
        raise InvalidInputError(message="Matrix set contains non-finite entries")
    scale = max(1.0, float(np.abs(stack).max()))
    asym = float(np.abs(stack - stack.transpose(0, 2, 1)).max())
    if asym > _SYMMETRY_TOL * scale:
        raise InvalidInputError(message=f"Matrix set is not symmetric (max asymmetry {asym:.3e})")
    return stack


def _offdiag(stack: np.ndarray) -> float:
    diag = np.einsum("kii->ki", stack)
    return float((stack**2).sum() - (diag**2).sum())


def offdiag_energy(matrices: MatrixSetLike, u: np.ndarray) -> float:
    """
    ``Σ_k Σ_{i≠j} (Uᵀ·M_k·U)²_ij``.

    Raises:
        InvalidInputError: on dimension mismatch or a non-orthogonal ``u``.
    """
    stack = as_matrix_set(matrices)
    u = np.asarray(u, dtype=np.float64)
    d = stack.shape[1]
    if u.shape != (d, d):
        raise InvalidInputError(message=f"U must be {d}x{d}, got {u.shape}")
    if np.abs(u.T @ u - np.eye(d)).max() > _ORTHOGONALITY_TOL:
        raise InvalidInputError(message="U is not orthogonal")
    return _offdiag(u.T @ stack @ u)


def joint_diagonalize(
    matrices: MatrixSetLike,
    angle_tol: float = DEFAULT_ANGLE_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    energy_tol: float = DEFAULT_ENERGY_TOL,
) -> JointDiagonalization:
    """
    Find an orthogonal U making every ``Uᵀ·M_k·U`` as diagonal as possible.

    Each sweep visits all pairs (p, q) and applies the Givens rotation whose angle, chosen in
    closed form from the 2x2 sub-problems aggregated over the set, minimizes the pair's share of
    the off-diagonal energy. Angles lie in (-π/4, π/4]; a pair whose diagonal entries are equal
    while its off-diagonal entries are not zero gets the full π/4 rotation.

    Sweeping stops as converged once the largest angle in a sweep is below ``angle_tol``, or once
    a sweep lowers the off-diagonal energy by no more than ``energy_tol`` times the total energy
    ``Σ_k ‖M_k‖²_F`` (a plateau that rounding keeps above ``angle_tol``). Otherwise it stops
    unconverged after ``max_sweeps``.

    Returns:
        JointDiagonalization with ``u``, the sweep count, the convergence flag and the off-diagonal
        energy recorded before the first sweep and after each sweep (non-increasing).

    Raises:
        InvalidInputError: for asymmetric/mismatched input or non-positive ``angle_tol``.
    """
    if angle_tol <= 0:
        raise InvalidInputError(message=f"angle_tol must be positive, got {angle_tol}")
    if max_sweeps < 1:
        raise InvalidInputError(message=f"max_sweeps must be >= 1, got {max_sweeps}")
    if energy_tol < 0:
        raise InvalidInputError(message=f"energy_tol must be non-negative, got {energy_tol}")

    a = as_matrix_set(matrices).copy()
    d = a.shape[1]
    v = np.eye(d)
    total = float((a**2).sum())
    history = [_offdiag(a)]
    converged = False
    sweeps = 0

    while sweeps < max_sweeps:
        sweeps += 1
        largest = 0.0
        for p in range(d - 1):
            for q in range(p + 1, d):
                g_diff = a[:, p, p] - a[:, q, q]
                g_off = a[:, p, q] + a[:, q, p]
                ton = g_diff @ g_diff - g_off @ g_off
                toff = 2.0 * (g_diff @ g_off)
                phi = math.atan2(toff, ton)
                if phi <= -math.pi:
                    phi = math.pi
                theta = 0.25 * phi
                largest = max(largest, abs(theta))
                if abs(theta) <= angle_tol:
                    continue

                c, s = math.cos(theta), math.sin(theta)
                col_p = a[:, :, p].copy()
                a[:, :, p] = c * col_p + s * a[:, :, q]
                a[:, :, q] = c * a[:, :, q] - s * col_p
                row_p = a[:, p, :].copy()
                a[:, p, :] = c * row_p + s * a[:, q, :]
                a[:, q, :] = c * a[:, q, :] - s * row_p
                v_p = v[:, p].copy()
                v[:, p] = c * v_p + s * v[:, q]
                v[:, q] = c * v[:, q] - s * v_p

        history.append(_offdiag(a))
        logger.debug(f"jointdiag sweep {sweeps}: max angle {largest:.3e}, offdiag {history[-1]:.6e}")
        if largest < angle_tol:
            converged = True
            break
        if history[-2] - history[-1] <= energy_tol * total:
            logger.debug(f"jointdiag: off-diagonal energy settled after {sweeps} sweeps")
            converged = True
            break

    if not converged:
        logger.warning(f"jointdiag: no convergence after {max_sweeps} sweeps")

    return JointDiagonalization(u=v, sweeps=sweeps, converged=converged, energy_history=tuple(history))
