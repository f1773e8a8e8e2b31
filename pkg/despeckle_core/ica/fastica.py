"""
FastICA: fixed-point maximization of an approximate negentropy.

Two contrasts are supported, ``G1(u) = (1/a1)·log cosh(a1·u)`` ("logcosh") and
``G2(u) = -exp(-u²/2)`` ("gauss"). Components are estimated in parallel with symmetric
decorrelation (default) or one at a time with Gram-Schmidt deflation.
"""

import functools
from typing import Callable, Optional, Tuple

import numpy as np
from loguru import logger
from scipy import integrate, linalg, stats

from despeckle_core.exceptions import InvalidInputError
from despeckle_core.ica.base import IcaConfig, assemble_result
from despeckle_core.ica.preprocessing import MatrixLike, as_matrix
from despeckle_core.schemas import UnmixingResult, WhiteningResult

CONTRASTS = ("logcosh", "gauss")
_UNIT_VARIANCE = (0.9, 1.1)
# a source counts as non-Gaussian when its negentropy exceeds this many sampling-noise units
_IDENTIFIABILITY_FACTOR = 10.0


def _contrast(name: str, a1: float) -> Callable[[np.ndarray], np.ndarray]:
    if name == "logcosh":
        # log cosh(x) = logaddexp(x, -x) - log 2, overflow-free
        return lambda u: (np.logaddexp(a1 * u, -a1 * u) - np.log(2.0)) / a1
    if name == "gauss":
        return lambda u: -np.exp(-(u**2) / 2.0)
    raise InvalidInputError(message=f"Unknown contrast {name!r}; expected one of {CONTRASTS}")


def _derivatives(name: str, a1: float) -> Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """``g = G'`` and ``g'`` evaluated elementwise."""
    if name == "logcosh":

        def logcosh(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            t = np.tanh(a1 * u)
            return t, a1 * (1.0 - t**2)

        return logcosh

    def gauss(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        e = np.exp(-(u**2) / 2.0)
        return u * e, (1.0 - u**2) * e

    return gauss


@functools.lru_cache(maxsize=32)
def gaussian_expectation(contrast: str, a1: float = 1.0) -> float:
    """``E{G(ν)}`` for a standard normal ν, by numerical quadrature."""
    g = _contrast(contrast, a1)
    value, _ = integrate.quad(lambda v: float(g(np.asarray(v))) * stats.norm.pdf(v), -np.inf, np.inf)
    return value


def negentropy_contrast(y: np.ndarray, contrast: str = "logcosh", a1: float = 1.0) -> float:
    """
    Approximate negentropy ``(E{G(y)} - E{G(ν)})²`` of a zero-mean, unit-variance signal.

    Non-negative, and zero in expectation for Gaussian ``y``.

    Raises:
        InvalidInputError: for an empty or non-finite signal, a variance outside [0.9, 1.1],
            an unknown contrast or ``a1`` outside [1, 2].
    """
    values = np.asarray(y, dtype=np.float64).ravel()
    if values.size == 0 or not np.isfinite(values).all():
        raise InvalidInputError(message="Negentropy needs a non-empty finite signal")
    if not 1.0 <= a1 <= 2.0:
        raise InvalidInputError(message=f"a1 must lie in [1, 2], got {a1}")
    var = float(values.var())
    if not _UNIT_VARIANCE[0] <= var <= _UNIT_VARIANCE[1]:
        raise InvalidInputError(message=f"Signal must have unit variance, got {var:.4f}", data={"variance": var})
    g = _contrast(contrast, a1)
    return float((g(values).mean() - gaussian_expectation(contrast, a1)) ** 2)


def _sym_decorrelation(w: np.ndarray) -> np.ndarray:
    """``W <- (W·Wᵀ)^(-1/2)·W``."""
    s, u = linalg.eigh(w @ w.T)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ w


def _gs_decorrelation(w: np.ndarray, basis: np.ndarray, j: int) -> np.ndarray:
    """Orthogonalize ``w`` against the first ``j`` (orthonormal) rows of ``basis``."""
    return w - (w @ basis[:j].T) @ basis[:j]


def _random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    return _sym_decorrelation(rng.standard_normal((d, d)))


def _fit_symmetric(z, w, g, max_iters, tol) -> Tuple[np.ndarray, int, bool]:
    n_samples = z.shape[1]
    for it in range(1, max_iters + 1):
        gwz, g_wz = g(w @ z)
        w_new = _sym_decorrelation(gwz @ z.T / n_samples - g_wz.mean(axis=1)[:, None] * w)
        lim = float(np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0)))
        w = w_new
        logger.trace(f"fastica iteration {it}: lim {lim:.3e}")
        if lim < tol:
            return w, it, True
    return w, max_iters, False


def _fit_deflation(z, w_init, g, max_iters, tol) -> Tuple[np.ndarray, int, bool]:
    d = w_init.shape[0]
    w_out = np.zeros((d, d))
    iterations = 0
    converged = True
    for j in range(d):
        w = w_init[j] / np.linalg.norm(w_init[j])
        done = False
        it = 0
        for it in range(1, max_iters + 1):
            gwz, g_wz = g(w @ z)
            w1 = (z * gwz).mean(axis=1) - g_wz.mean() * w
            w1 = _gs_decorrelation(w1, w_out, j)
            w1 /= np.linalg.norm(w1)
            lim = abs(abs(float(w1 @ w)) - 1.0)
            w = w1
            if lim < tol:
                done = True
                break
        w_out[j] = w
        iterations = max(iterations, it)
        converged = converged and done
    return w_out, iterations, converged


def fastica(
    Z: MatrixLike,
    config: Optional[IcaConfig] = None,
    whitening: Optional[WhiteningResult] = None,
    w_init: Optional[np.ndarray] = None,
) -> UnmixingResult:
    """
    Fixed-point iteration ``w+ = E{z·g(wᵀz)} - E{g'(wᵀz)}·w`` on whitened data.

    W starts from ``w_init`` or a random orthogonal matrix seeded by ``config.seed``; a row has
    converged when ``|⟨w_new, w_old⟩| > 1 - tol``. The returned W is orthogonal.

    A warning (not an error) is attached when no estimated source is measurably non-Gaussian.

    Raises:
        InvalidInputError: for malformed input or an ill-shaped ``w_init``.
    """
    config = config or IcaConfig(algorithm="fastica")
    z = as_matrix(Z)
    d, n_samples = z.shape
    g = _derivatives(config.contrast, config.a1)

    if w_init is None:
        w0 = _random_orthogonal(d, np.random.default_rng(config.seed))
    else:
        w0 = np.array(w_init, dtype=np.float64)
        if w0.shape != (d, d):
            raise InvalidInputError(message=f"w_init must be {d}x{d}, got {w0.shape}")

    if config.fastica_mode == "deflation":
        w, iterations, converged = _fit_deflation(z, w0, g, config.max_iters, config.tol)
    else:
        w, iterations, converged = _fit_symmetric(z, _sym_decorrelation(w0), g, config.max_iters, config.tol)

    if not converged:
        logger.warning(f"fastica: no convergence after {config.max_iters} iterations")

    sources = w @ z
    big_g = _contrast(config.contrast, config.a1)
    g_values = big_g(sources)
    negentropy = (g_values.mean(axis=1) - gaussian_expectation(config.contrast, config.a1)) ** 2
    noise_floor = _IDENTIFIABILITY_FACTOR * g_values.var(axis=1) / n_samples

    warnings = []
    if not np.any(negentropy > noise_floor):
        warnings.append("low identifiability: no estimated source departs measurably from Gaussian")
        logger.warning(f"fastica: {warnings[-1]}")

    diagnostics = {"mode": config.fastica_mode, "contrast": config.contrast, "negentropy": negentropy}
    return assemble_result("fastica", z, w, whitening, iterations, converged, warnings, diagnostics)
