"""InfoMax ICA: stochastic gradient ascent of the output entropy of a logistic network."""

from typing import Optional

import numpy as np
from loguru import logger
from scipy import special, stats

from despeckle_core.exceptions import DivergenceError, InvalidInputError
from despeckle_core.ica.base import IcaConfig, assemble_result
from despeckle_core.ica.preprocessing import MatrixLike, as_matrix
from despeckle_core.schemas import UnmixingResult, WhiteningResult

MAX_CONDITION = 1e12
DEFAULT_BATCH = 256
# training stops unconverged once annealing takes the rate below this share of its start
MIN_LEARNING_RATE_SHARE = 1e-6


def default_learning_rate(d: int) -> float:
    return 0.01 / np.log(d + 1.0)


def _score(u: np.ndarray, signs: Optional[np.ndarray]) -> np.ndarray:
    """
    Negative score ``-∂ log f(u)/∂u`` of the source model.

    Logistic model: ``2·y - 1`` with ``y = sigmoid(u)``. Extended model: ``K·tanh(u) + u`` with
    ``K = +1`` for super-Gaussian and ``-1`` for sub-Gaussian components.
    """
    if signs is None:
        return 2.0 * special.expit(u) - 1.0
    return signs[:, None] * np.tanh(u) + u


def _update_angle(previous: Optional[np.ndarray], current: np.ndarray) -> float:
    """Angle in degrees between two consecutive epoch updates; 0 for the first epoch."""
    if previous is None:
        return 0.0
    norms = float(np.linalg.norm(previous) * np.linalg.norm(current))
    if norms == 0:
        return 0.0
    cosine = float(np.sum(previous * current)) / norms
    return float(np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0))))


def _kurtosis_signs(sources: np.ndarray) -> np.ndarray:
    k = np.sign(stats.kurtosis(sources, axis=1))
    k[k == 0] = 1.0
    return k


def infomax(
    Z: MatrixLike,
    config: Optional[IcaConfig] = None,
    whitening: Optional[WhiteningResult] = None,
    w_init: Optional[np.ndarray] = None,
) -> UnmixingResult:
    """
    Estimate W maximizing the joint entropy of ``y = sigmoid(W·z + w0)`` over whitened data.

    Mini-batch updates ``ΔW = η·(W⁻ᵀ + (1 - 2y)·zᵀ/B)`` and ``Δw0 = η·mean(1 - 2y)``, batches drawn
    from a permutation seeded by ``config.seed``. The learning rate is multiplied by
    ``config.anneal`` whenever the direction of the epoch update turns by more than
    ``config.anneal_degrees`` from the previous one, which happens once mini-batch noise dominates
    the drift. Training converges when ``‖ΔW‖/‖W‖ < config.tol`` and stops unconverged when
    the rate falls below 1e-6 of its start. Rows of the returned W are scaled to unit-variance
    sources.

    Raises:
        InvalidInputError: for malformed input or an ill-shaped ``w_init``.
        DivergenceError: when W becomes singular (condition number above 1e12) or non-finite.
            ``data`` carries ``last_stable_w`` and the epoch.
    """
    config = config or IcaConfig(algorithm="infomax")
    z = as_matrix(Z)
    d, n_samples = z.shape
    if n_samples < 2:
        raise InvalidInputError(message="InfoMax needs at least two samples")

    rng = np.random.default_rng(config.seed)
    lr = config.learning_rate or default_learning_rate(d)
    batch = min(config.batch_size or DEFAULT_BATCH, n_samples)

    if w_init is None:
        w = np.eye(d)
    else:
        w = np.array(w_init, dtype=np.float64)
        if w.shape != (d, d):
            raise InvalidInputError(message=f"w_init must be {d}x{d}, got {w.shape}")
    w0 = np.zeros(d)
    signs = _kurtosis_signs(w @ z) if config.extended else None

    stable_w = w.copy()
    prev_delta: Optional[np.ndarray] = None
    lr_floor = MIN_LEARNING_RATE_SHARE * lr
    converged = False
    epoch = 0

    for epoch in range(1, config.max_iters + 1):
        w_start = w.copy()
        order = rng.permutation(n_samples)
        try:
            for start in range(0, n_samples, batch):
                zb = z[:, order[start : start + batch]]
                phi = _score(w @ zb + w0[:, None], signs)
                w = w + lr * (np.linalg.inv(w.T) - phi @ zb.T / zb.shape[1])
                w0 = w0 - lr * phi.mean(axis=1)
        except np.linalg.LinAlgError as e:
            raise DivergenceError(
                message=f"InfoMax: singular W in epoch {epoch}",
                data={"last_stable_w": stable_w, "iteration": epoch},
            ) from e

        if not np.isfinite(w).all() or np.linalg.cond(w) > MAX_CONDITION:
            raise DivergenceError(
                message=f"InfoMax diverged in epoch {epoch} (lr={lr:.3e})",
                data={"last_stable_w": stable_w, "iteration": epoch},
            )
        stable_w = w.copy()

        delta = w - w_start
        ratio = float(np.linalg.norm(delta)) / float(np.linalg.norm(w))
        turn = _update_angle(prev_delta, delta)
        if turn > config.anneal_degrees:
            lr *= config.anneal
        prev_delta = delta
        if config.extended:
            signs = _kurtosis_signs(w @ z)
        logger.trace(f"infomax epoch {epoch}: step {ratio:.3e}, turn {turn:.1f} deg, lr {lr:.3e}")
        if ratio < config.tol:
            converged = True
            break
        if lr < lr_floor:
            logger.warning(f"infomax: learning rate exhausted ({lr:.3e}) in epoch {epoch}")
            break

    if not converged and epoch == config.max_iters:
        logger.warning(f"infomax: no convergence after {config.max_iters} epochs")

    scale = (w @ z).std(axis=1)
    scale[scale == 0] = 1.0
    w = w / scale[:, None]

    diagnostics = {"learning_rate": lr, "batch_size": batch, "bias": w0}
    if signs is not None:
        diagnostics["kurtosis_signs"] = signs
    return assemble_result("infomax", z, w, whitening, epoch, converged, diagnostics=diagnostics)
