"""Second-order blind identification: joint diagonalization of lagged covariances."""

from typing import Optional

import numpy as np
from loguru import logger

from despeckle_core.ica.base import IcaConfig, assemble_result, check_lags
from despeckle_core.ica.jointdiag import joint_diagonalize
from despeckle_core.ica.preprocessing import MatrixLike, lagged_covariance, whiten
from despeckle_core.schemas import UnmixingResult

# lagged structure must exceed this many standard errors of a white-noise estimate
_SEPARABILITY_FACTOR = 10.0


def sobi(X: MatrixLike, config: Optional[IcaConfig] = None) -> UnmixingResult:
    """
    Whiten ``X``, form the symmetrized lagged covariances ``R̂(p)`` for ``p`` in ``config.lags``
    and jointly diagonalize them. ``W = Uᵀ`` and the mixing estimate is ``Q⁺·U``.

    Samples are taken in column order, so the lags run along the vectorized image.

    When no lagged covariance entry stands out from sampling noise the sources are not
    separable by second-order statistics: the result is returned with ``converged = False``
    and a warning.

    Raises:
        InvalidInputError: when the largest lag is not smaller than P, or for malformed input.
        DegenerateInputError: for a zero covariance.
    """
    config = config or IcaConfig(algorithm="sobi")
    z, whitening = whiten(X, config.drop_tol)
    n_samples = z.shape[1]
    check_lags(config.lags, n_samples)

    lagged = np.array([lagged_covariance(z, p) for p in config.lags])
    jd = joint_diagonalize(lagged, config.angle_tol, config.max_sweeps, config.energy_tol)
    u = jd.u

    warnings = []
    converged = jd.converged
    structure = float(np.abs(lagged).max())
    noise = 1.0 / np.sqrt(n_samples - max(config.lags))
    if structure < _SEPARABILITY_FACTOR * noise:
        converged = False
        warnings.append(
            f"non-separable: lagged covariances ({structure:.3e}) do not exceed sampling noise ({noise:.3e})"
        )
        logger.warning(f"sobi: {warnings[-1]}")

    diagnostics = {
        "lags": list(config.lags),
        "sweeps": jd.sweeps,
        "offdiag_energy": jd.energy_history,
        "lagged_structure": structure,
    }
    return assemble_result(
        "sobi",
        z,
        u.T,
        whitening,
        jd.sweeps,
        converged,
        warnings,
        diagnostics,
        mixing=whitening.q_pinv @ u,
    )
