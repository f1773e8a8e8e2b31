"""Synthetic fixtures shared by the estimator, registration and pipeline tests."""

from typing import Optional

import numpy as np
from scipy import linalg, ndimage

from despeckle_core.schemas import Image, UnmixingResult


def standardize(sources: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-variance rows."""
    centered = sources - sources.mean(axis=1, keepdims=True)
    return centered / centered.std(axis=1, keepdims=True)


def exactly_white(sources: np.ndarray) -> np.ndarray:
    """Symmetric whitening: identity sample covariance while keeping the rows aligned with the input."""
    s = standardize(sources)
    evals, evecs = linalg.eigh(s @ s.T / s.shape[1])
    return (evecs / np.sqrt(evals)) @ evecs.T @ s


def random_mixing(d: int, rng: np.random.Generator) -> np.ndarray:
    """Well-conditioned random d x d mixing matrix."""
    return rng.uniform(-1.0, 1.0, size=(d, d)) + 2.0 * np.eye(d)


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    q, _ = linalg.qr(rng.standard_normal((d, d)))
    return q


def laplacian_sources(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    return standardize(rng.laplace(size=(d, n)))


def uniform_sources(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    return standardize(rng.uniform(-1.0, 1.0, size=(d, n)))


def textured_image(size: int = 128, seed: int = 7, sigma: float = 2.0) -> Image:
    """Smooth random texture in [0.1, 0.9]; registers reliably in every direction."""
    noise = ndimage.gaussian_filter(np.random.default_rng(seed).random((size, size)), sigma)
    noise = (noise - noise.min()) / (noise.max() - noise.min())
    return Image(pixels=0.1 + 0.8 * noise)


def unmixing_result(sources: np.ndarray, algorithm: str = "fastica", converged: bool = True) -> UnmixingResult:
    """An UnmixingResult carrying ``sources`` with identity matrices around it."""
    d = sources.shape[0]
    return UnmixingResult(
        algorithm=algorithm,
        w=np.eye(d),
        w_total=np.eye(d),
        sources=sources,
        mixing=np.eye(d),
        means=np.zeros(d),
        iterations=1,
        converged=converged,
    )


def correlation_matrix(a: np.ndarray, b: Optional[np.ndarray] = None) -> np.ndarray:
    """|Pearson correlation| between the rows of ``a`` and the rows of ``b``."""
    b = a if b is None else b
    a = standardize(a)
    b = standardize(b)
    return np.abs(a @ b.T / a.shape[1])
