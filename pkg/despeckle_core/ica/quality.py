import numpy as np

from despeckle_core.exceptions import InvalidInputError


def amari_index(w_total: np.ndarray, mixing: np.ndarray) -> float:
    """
    Separation error of an unmixing ``w_total`` (d x N) against a known mixing (N x d).

    With ``G = w_total·mixing``, the index is 0 iff G is a scaled permutation and 1 at worst:

        (Σ_i (Σ_j |g_ij| / max_k |g_ik| - 1) + Σ_j (Σ_i |g_ij| / max_k |g_kj| - 1)) / (2d(d-1))

    Raises:
        InvalidInputError: on incompatible shapes, non-finite entries or an all-zero row/column in G.
    """
    w = np.asarray(w_total, dtype=np.float64)
    a = np.asarray(mixing, dtype=np.float64)
    if w.ndim != 2 or a.ndim != 2 or w.shape[1] != a.shape[0] or w.shape[0] != a.shape[1]:
        raise InvalidInputError(message=f"Incompatible shapes {w.shape} and {a.shape}")
    g = np.abs(w @ a)
    if not np.isfinite(g).all():
        raise InvalidInputError(message="Global matrix has non-finite entries")
    d = g.shape[0]
    if d == 1:
        return 0.0
    row_max = g.max(axis=1)
    col_max = g.max(axis=0)
    if (row_max == 0).any() or (col_max == 0).any():
        raise InvalidInputError(message="Global matrix has an all-zero row or column")
    rows = (g.sum(axis=1) / row_max - 1.0).sum()
    cols = (g.sum(axis=0) / col_max - 1.0).sum()
    return float((rows + cols) / (2.0 * d * (d - 1)))
