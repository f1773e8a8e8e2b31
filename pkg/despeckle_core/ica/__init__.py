from typing import Optional

from despeckle_core.exceptions import InvalidInputError
from despeckle_core.ica.base import ICA_ALGORITHMS, IcaConfig
from despeckle_core.ica.fastica import fastica, negentropy_contrast
from despeckle_core.ica.infomax import infomax
from despeckle_core.ica.jade import jade, quadricov_identity, quadricov_projected
from despeckle_core.ica.jointdiag import joint_diagonalize, offdiag_energy
from despeckle_core.ica.preprocessing import MatrixLike, center, covariance, lagged_covariance, whiten
from despeckle_core.ica.quality import amari_index
from despeckle_core.ica.sobi import sobi
from despeckle_core.schemas import UnmixingResult
from despeckle_core.timing import Stopwatch


def run_ica(X: MatrixLike, config: IcaConfig, algorithm: Optional[str] = None) -> UnmixingResult:
    """
    Run one estimator on a raw (unwhitened) data matrix and time it.

    InfoMax and FastICA are preceded by whitening; SOBI and JADE whiten internally. The elapsed
    wall-clock time, whitening included, is stored on the result.

    Raises:
        InvalidInputError: for an unknown algorithm.
    """
    name = algorithm or config.algorithm
    if name not in ICA_ALGORITHMS:
        raise InvalidInputError(message=f"Unknown algorithm {name!r}; expected one of {ICA_ALGORITHMS}")
    cfg = config.for_algorithm(name)

    with Stopwatch(name) as sw:
        if name in ("sobi", "jade"):
            result = sobi(X, cfg) if name == "sobi" else jade(X, cfg)
        else:
            z, whitening = whiten(X, cfg.drop_tol)
            estimator = infomax if name == "infomax" else fastica
            result = estimator(z, cfg, whitening=whitening)
    return result.model_copy(update={"elapsed_seconds": sw.elapsed})


__all__ = [
    "ICA_ALGORITHMS",
    "IcaConfig",
    "amari_index",
    "center",
    "covariance",
    "fastica",
    "infomax",
    "jade",
    "joint_diagonalize",
    "lagged_covariance",
    "negentropy_contrast",
    "offdiag_energy",
    "quadricov_identity",
    "quadricov_projected",
    "run_ica",
    "sobi",
    "whiten",
]
