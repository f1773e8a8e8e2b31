from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from despeckle_core.exceptions import InvalidInputError
from despeckle_core.schemas import UnmixingResult, WhiteningResult

Algorithm = Literal["infomax", "fastica", "jade", "sobi"]
ICA_ALGORITHMS: tuple = ("infomax", "fastica", "jade", "sobi")

DEFAULT_LAGS = list(range(1, 11))


def parse_int_list(value: Any) -> Any:
    """
    Accept ``[1, 2]``, ``"1, 2, 5"`` or an inclusive range ``"1-10"`` from ini files.
    """
    if not isinstance(value, str):
        return value
    items: List[int] = []
    for token in (t.strip() for t in value.split(",")):
        if not token:
            continue
        if "-" in token[1:]:
            lo, hi = token.split("-", 1)
            items.extend(range(int(lo), int(hi) + 1))
        else:
            items.append(int(token))
    return items


class IcaConfig(BaseModel):
    """
    Settings for one ICA estimator. Fields not used by the selected algorithm are ignored.

    Defaults: InfoMax learning rate ``0.01/ln(d+1)`` and mini-batch ``min(256, P)`` when left unset.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    algorithm: Algorithm = "fastica"
    max_iters: int = Field(512, ge=1, description="Epochs (InfoMax) or fixed-point iterations (FastICA).")
    tol: float = Field(1e-6, gt=0)
    seed: int = Field(0, ge=0, lt=2**64)

    # InfoMax
    learning_rate: Optional[float] = Field(None, gt=0)
    anneal: float = Field(0.9, gt=0, le=1)
    anneal_degrees: float = Field(
        60.0, gt=0, lt=180, description="Anneal when consecutive epoch updates turn by more than this."
    )
    batch_size: Optional[int] = Field(None, ge=1)
    extended: bool = Field(False, description="Switch score function per component by kurtosis sign.")

    # FastICA
    contrast: Literal["logcosh", "gauss"] = "logcosh"
    a1: float = Field(1.0, ge=1, le=2)
    fastica_mode: Literal["symmetric", "deflation"] = "symmetric"

    # SOBI / JADE
    lags: List[int] = Field(default_factory=lambda: list(DEFAULT_LAGS))
    angle_tol: float = Field(1e-8, gt=0)
    max_sweeps: int = Field(100, ge=1)
    energy_tol: float = Field(
        1e-12, ge=0, description="Stop sweeping once a sweep removes less than this share of the energy."
    )

    # whitening
    drop_tol: float = Field(1e-12, gt=0, lt=1)

    @field_validator("lags", mode="before")
    @classmethod
    def _parse_lags(cls, v: Any) -> Any:
        return parse_int_list(v)

    @field_validator("lags")
    @classmethod
    def _check_lags(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("lags must not be empty")
        if v[0] < 1 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("lags must be positive and strictly increasing")
        return v

    def for_algorithm(self, algorithm: str) -> "IcaConfig":
        return self.model_copy(update={"algorithm": algorithm})


def check_lags(lags: Sequence[int], n_samples: int) -> None:
    if max(lags) >= n_samples:
        raise InvalidInputError(message=f"Largest lag {max(lags)} must be < P = {n_samples}")


def assemble_result(
    algorithm: str,
    z: np.ndarray,
    w: np.ndarray,
    whitening: Optional[WhiteningResult],
    iterations: int,
    converged: bool,
    warnings: Sequence[str] = (),
    diagnostics: Optional[Dict[str, Any]] = None,
    mixing: Optional[np.ndarray] = None,
) -> UnmixingResult:
    """
    Package a whitened-space unmixing ``w`` into an UnmixingResult.

    Without a whitening record the whitened data are treated as the observations (Q = I).
    """
    if whitening is not None:
        w_total = w @ whitening.q
        means = whitening.means
        if mixing is None:
            mixing = np.linalg.pinv(w_total)
    else:
        w_total = w
        means = np.zeros(z.shape[0])
        if mixing is None:
            mixing = np.linalg.pinv(w)

    return UnmixingResult(
        algorithm=algorithm,
        w=w,
        w_total=w_total,
        sources=w @ z,
        mixing=mixing,
        means=means,
        iterations=iterations,
        converged=converged,
        warnings=tuple(warnings),
        diagnostics=diagnostics or {},
        whitening=whitening,
    )
