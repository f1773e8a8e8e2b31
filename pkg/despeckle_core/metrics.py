"""
ROI-based image quality: SNR, CNR and ENL.

With ``μ_b, σ_b`` the background ROI statistics and ``μ_m, σ_m`` those of feature ROI m:

    SNR_m = 20·log10(μ_m / σ_b)        (dB)
    CNR_m = (μ_m - μ_b) / √(σ_m² + σ_b²)
    ENL_m = μ_m² / σ_m²                 (homogeneous ROIs only)

Standard deviations are population (1/n) estimates.
"""

import math
from importlib import resources
from pathlib import Path
from typing import Callable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import Field, model_validator

from despeckle_core.exceptions import InvalidInputError, UndefinedMetricError
from despeckle_core.schemas import CoreModel, Image

DEFAULT_ROI_FILE = "phantom.rois"


class Roi(CoreModel):
    """Axis-aligned rectangle; ``x, y`` is the top-left corner (column, row)."""

    kind: Literal["background", "feature"]
    x: int = Field(..., ge=0)
    y: int = Field(..., ge=0)
    w: int = Field(..., ge=2)
    h: int = Field(..., ge=2)
    roi_id: int = Field(0, ge=0, description="Position in the ROI file.")
    homogeneous: bool = True

    def overlaps(self, other: "Roi") -> bool:
        return (
            self.x < other.x + other.w
            and other.x < self.x + self.w
            and self.y < other.y + other.h
            and other.y < self.y + self.h
        )

    def fits(self, shape: Tuple[int, int]) -> bool:
        return self.y + self.h <= shape[0] and self.x + self.w <= shape[1]

    def pixels(self, img: Image) -> np.ndarray:
        if not self.fits(img.shape):
            raise InvalidInputError(message=f"ROI {self.roi_id} exceeds image bounds {img.shape}")
        return img.pixels[self.y : self.y + self.h, self.x : self.x + self.w]


class RoiSet(CoreModel):
    """One background ROI plus feature ROIs, none of which overlaps the background."""

    rois: Tuple[Roi, ...]

    @model_validator(mode="after")
    def _check(self) -> "RoiSet":
        backgrounds = [r for r in self.rois if r.kind == "background"]
        if len(backgrounds) != 1:
            raise ValueError(f"exactly one background ROI required, got {len(backgrounds)}")
        if not any(r.kind == "feature" for r in self.rois):
            raise ValueError("at least one feature ROI required")
        bg = backgrounds[0]
        clash = [r.roi_id for r in self.rois if r.kind == "feature" and r.overlaps(bg)]
        if clash:
            raise ValueError(f"feature ROIs {clash} overlap the background ROI")
        return self

    @property
    def background(self) -> Roi:
        return next(r for r in self.rois if r.kind == "background")

    @property
    def features(self) -> List[Roi]:
        return [r for r in self.rois if r.kind == "feature"]


class MetricSeries(CoreModel):
    """Per-feature-ROI values of one metric and their mean over the ROIs that count."""

    roi_ids: Tuple[int, ...]
    values: Tuple[float, ...]
    mean: float
    warnings: Tuple[str, ...] = ()


class RoiMetrics(CoreModel):
    roi_id: int
    snr_db: float
    cnr: float
    enl: float


class MetricsReport(CoreModel):
    rows: Tuple[RoiMetrics, ...]
    mean_snr_db: float
    mean_cnr: float
    mean_enl: float
    elapsed_seconds: Optional[float] = None
    warnings: Tuple[str, ...] = ()


def parse_rois(text: str) -> RoiSet:
    """
    Parse ``kind x y w h [edge]`` lines; ``#`` starts a comment. ``edge`` marks a feature ROI that is
    not homogeneous, which excludes it from ENL.

    Raises:
        InvalidInputError: for malformed lines or an invalid set.
    """
    rois = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) not in (5, 6) or (len(tokens) == 6 and tokens[5] != "edge"):
            raise InvalidInputError(message=f"ROI line {lineno}: expected 'kind x y w h [edge]', got {raw!r}")
        try:
            x, y, w, h = (int(t) for t in tokens[1:5])
            rois.append(
                Roi(kind=tokens[0], x=x, y=y, w=w, h=h, roi_id=len(rois), homogeneous=len(tokens) == 5)
            )
        except ValueError as e:
            raise InvalidInputError(message=f"ROI line {lineno}: {e}") from e
    try:
        return RoiSet(rois=tuple(rois))
    except ValueError as e:
        raise InvalidInputError(message=f"Invalid ROI set: {e}") from e


def load_rois(path: Optional[Union[str, Path]] = None) -> RoiSet:
    """Read an ROI file; without a path, the ROI set of the default phantom."""
    if path is None:
        return parse_rois(resources.files("despeckle_core").joinpath("data", DEFAULT_ROI_FILE).read_text("utf-8"))
    p = Path(path)
    if not p.is_file():
        raise InvalidInputError(message=f"ROI file not found: {p}")
    return parse_rois(p.read_text(encoding="utf-8"))


def roi_stats(img: Image, roi: Roi) -> Tuple[float, float]:
    """Mean and population standard deviation of the ROI pixels."""
    values = roi.pixels(img)
    return float(values.mean()), float(values.std())


def _check_bounds(img: Image, rois: RoiSet) -> None:
    outside = [r.roi_id for r in rois.rois if not r.fits(img.shape)]
    if outside:
        raise InvalidInputError(message=f"ROIs {outside} exceed image bounds {img.shape}")


def _series(ids: Sequence[int], values: Sequence[float], counted: Sequence[bool], warnings: List[str]) -> MetricSeries:
    included = [v for v, c in zip(values, counted) if c]
    mean = float(np.mean(included)) if included else math.nan
    return MetricSeries(roi_ids=tuple(ids), values=tuple(values), mean=mean, warnings=tuple(warnings))


def snr(img: Image, rois: RoiSet) -> MetricSeries:
    """
    SNR in dB per feature ROI against the background σ.

    Raises:
        UndefinedMetricError: if the background σ is zero.
    """
    _check_bounds(img, rois)
    _, sigma_b = roi_stats(img, rois.background)
    if sigma_b == 0:
        raise UndefinedMetricError(message="SNR undefined: background standard deviation is zero (misplaced ROI?)")
    ids, values, counted, warnings = [], [], [], []
    for roi in rois.features:
        mu, _ = roi_stats(img, roi)
        ids.append(roi.roi_id)
        if mu <= 0:
            values.append(math.nan)
            counted.append(False)
            warnings.append(f"SNR undefined for ROI {roi.roi_id} (mean {mu:.3g} <= 0); excluded from the mean")
            logger.warning(warnings[-1])
        else:
            values.append(20.0 * math.log10(mu / sigma_b))
            counted.append(True)
    return _series(ids, values, counted, warnings)


def cnr(img: Image, rois: RoiSet) -> MetricSeries:
    """
    CNR per feature ROI.

    Raises:
        UndefinedMetricError: when ``σ_m² + σ_b²`` is zero for some ROI.
    """
    _check_bounds(img, rois)
    mu_b, sigma_b = roi_stats(img, rois.background)
    ids, values = [], []
    for roi in rois.features:
        mu, sigma = roi_stats(img, roi)
        denom = math.sqrt(sigma**2 + sigma_b**2)
        if denom == 0:
            raise UndefinedMetricError(message=f"CNR undefined for ROI {roi.roi_id}: both regions are constant")
        ids.append(roi.roi_id)
        values.append((mu - mu_b) / denom)
    return _series(ids, values, [True] * len(values), [])


def enl(img: Image, rois: RoiSet) -> MetricSeries:
    """
    ENL per homogeneous feature ROI (NaN and not averaged for the others). A constant ROI yields
    ``+inf`` with a warning.
    """
    _check_bounds(img, rois)
    ids, values, counted, warnings = [], [], [], []
    for roi in rois.features:
        ids.append(roi.roi_id)
        if not roi.homogeneous:
            values.append(math.nan)
            counted.append(False)
            continue
        mu, sigma = roi_stats(img, roi)
        if sigma == 0:
            values.append(math.inf)
            warnings.append(f"ENL of ROI {roi.roi_id} is infinite (constant region)")
            logger.warning(warnings[-1])
        else:
            values.append(mu**2 / sigma**2)
        counted.append(True)
    return _series(ids, values, counted, warnings)


def evaluate(img: Image, rois: RoiSet) -> MetricsReport:
    """
    All three metrics for every feature ROI. A metric that is undefined for the whole image is
    reported as NaN with a warning instead of failing the evaluation.
    """
    features = rois.features
    warnings: List[str] = []
    columns = {}
    metric: Callable[[Image, RoiSet], MetricSeries]
    for name, metric in (("snr_db", snr), ("cnr", cnr), ("enl", enl)):
        try:
            series = metric(img, rois)
        except UndefinedMetricError as e:
            logger.warning(str(e))
            warnings.append(str(e))
            series = MetricSeries(
                roi_ids=tuple(r.roi_id for r in features), values=(math.nan,) * len(features), mean=math.nan
            )
        warnings.extend(series.warnings)
        columns[name] = series

    rows = tuple(
        RoiMetrics(
            roi_id=roi.roi_id,
            snr_db=columns["snr_db"].values[i],
            cnr=columns["cnr"].values[i],
            enl=columns["enl"].values[i],
        )
        for i, roi in enumerate(features)
    )
    return MetricsReport(
        rows=rows,
        mean_snr_db=columns["snr_db"].mean,
        mean_cnr=columns["cnr"].mean,
        mean_enl=columns["enl"].mean,
        warnings=tuple(warnings),
    )
