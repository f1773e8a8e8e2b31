"""
Synthetic multiplicative speckle and log-domain conversion.

Speckle follows the L-look intensity law: i.i.d. Gamma(shape L, scale 1/L) fields of unit mean,
independent across frames. Frame ``i`` draws its jitter and its field from
``numpy.random.default_rng(SeedSequence([seed, i]))``, so any frame can be regenerated alone.
"""

import math
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from despeckle_core.exceptions import InvalidInputError
from despeckle_core.registration import warp_rigid
from despeckle_core.schemas import CoreModel, Image, ImageStack, RigidTransform

DEFAULT_EPS = 1e-4


class SpeckleConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    looks: float = Field(4.0, gt=0, description="Gamma shape L; ENL of a homogeneous region.")
    n_frames: int = Field(10, ge=1)
    jitter_dx: float = Field(0.0, ge=0, description="Max |dx| in pixels.")
    jitter_dy: float = Field(0.0, ge=0, description="Max |dy| in pixels.")
    jitter_theta: float = Field(0.0, ge=0, description="Max |theta| in degrees.")
    seed: int = Field(0, ge=0, lt=2**64)


class PhantomConfig(BaseModel):
    """Layered test object: curved horizontal bands of constant reflectivity over a dark background."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    height: int = Field(128, ge=32)
    width: int = Field(128, ge=32)
    background: float = Field(0.02, ge=0, le=1)
    # top edge of each band as a fraction of the height, paired with the band intensity
    band_tops: List[float] = Field(default_factory=lambda: [0.1875, 0.3125, 0.46875, 0.578125, 0.703125, 0.796875])
    band_levels: List[float] = Field(default_factory=lambda: [0.25, 0.08, 0.18, 0.05, 0.22, 0.12])
    curvature: float = Field(3.0, ge=0, description="Amplitude in pixels of the sinusoidal band edges.")
    texture: float = Field(0.05, ge=0, le=0.5, description="Amplitude of the blobs in the deepest band.")

    @model_validator(mode="after")
    def _check_bands(self) -> "PhantomConfig":
        if len(self.band_tops) != len(self.band_levels):
            raise ValueError("band_tops and band_levels must have equal length")
        if any(b <= a for a, b in zip(self.band_tops, self.band_tops[1:])):
            raise ValueError("band_tops must be strictly increasing")
        if any(not 0 <= v <= 1 for v in self.band_levels + self.band_tops):
            raise ValueError("band positions and levels must lie in [0, 1]")
        return self


class LogScale(CoreModel):
    """Parameters of one log compression, sufficient to invert it exactly."""

    lo: float
    hi: float
    eps: float = Field(..., gt=0)
    shape: Tuple[int, int]

    @model_validator(mode="after")
    def _check(self) -> "LogScale":
        if not self.hi > self.lo:
            raise ValueError("hi must exceed lo")
        return self


def make_phantom(config: Optional[PhantomConfig] = None) -> Image:
    """
    Deterministic layered phantom. Band edges follow ``top + curvature·sin(2πx/W + φ_k)``; the
    deepest band carries Gaussian blobs. The default geometry matches the packaged ROI file.
    """
    config = config or PhantomConfig()
    h, w = config.height, config.width
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    pixels = np.full((h, w), config.background)

    for k, (top, level) in enumerate(zip(config.band_tops, config.band_levels)):
        edge = top * h + config.curvature * np.sin(2.0 * math.pi * xx / w + 0.7 * k)
        pixels[yy >= edge] = level

    if config.texture > 0 and config.band_tops:
        deepest = config.band_tops[-1] * h + config.curvature
        span = h - deepest
        for j, cx in enumerate(np.linspace(0.1, 0.9, 6) * w):
            cy = deepest + span * (0.35 if j % 2 else 0.7)
            sign = 1.0 if j % 2 else -1.0
            blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * (span / 6.0) ** 2))
            pixels += sign * config.texture * blob * (yy > deepest)

    return Image.from_array(pixels)


def _draw_transform(rng: np.random.Generator, config: SpeckleConfig) -> RigidTransform:
    dx = rng.uniform(-config.jitter_dx, config.jitter_dx) if config.jitter_dx > 0 else 0.0
    dy = rng.uniform(-config.jitter_dy, config.jitter_dy) if config.jitter_dy > 0 else 0.0
    theta = math.radians(rng.uniform(-config.jitter_theta, config.jitter_theta)) if config.jitter_theta > 0 else 0.0
    return RigidTransform(dx=float(dx), dy=float(dy), theta=theta)


def speckle_field(shape: Tuple[int, int], looks: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean Gamma(L, 1/L) multiplicative field."""
    return rng.gamma(shape=looks, scale=1.0 / looks, size=shape)


def generate_speckle_stack(clean: Image, config: SpeckleConfig) -> Tuple[ImageStack, List[RigidTransform]]:
    """
    ``frame_i = clip(warp_rigid(clean, T_i) ⊙ S_i, 0, 1)``.

    Frame 0 is untransformed, so ``T_i`` is also the motion of frame ``i`` relative to frame 0.
    Other transforms are uniform within the jitter bounds.

    Returns:
        The stack and the N true transforms.
    """
    frames = []
    transforms = []
    for i in range(config.n_frames):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, i]))
        t = RigidTransform.identity() if i == 0 else _draw_transform(rng, config)
        moved = warp_rigid(clean, t).pixels
        frames.append(np.clip(moved * speckle_field(moved.shape, config.looks, rng), 0.0, 1.0))
        transforms.append(t)
    clipped = float(np.mean([np.mean(f >= 1.0) for f in frames]))
    if clipped > 0.01:
        logger.warning(f"speckle: {clipped:.1%} of pixels saturated at 1")
    return ImageStack(frames=np.stack(frames)), transforms


def _log_scale(values: np.ndarray, eps: float, adaptive: bool, shape: Tuple[int, int]) -> LogScale:
    if eps <= 0:
        raise InvalidInputError(message=f"eps must be positive, got {eps}")
    if not adaptive:
        return LogScale(lo=math.log(eps), hi=math.log1p(eps), eps=eps, shape=shape)
    logs = np.log(values + eps)
    lo, hi = float(logs.min()), float(logs.max())
    return LogScale(lo=lo, hi=hi if hi > lo else lo + 1.0, eps=eps, shape=shape)


def _compress(pixels: np.ndarray, scale: LogScale) -> np.ndarray:
    return np.clip((np.log(pixels + scale.eps) - scale.lo) / (scale.hi - scale.lo), 0.0, 1.0)


def log_compress(img: Image, eps: float = DEFAULT_EPS, adaptive: bool = False) -> Tuple[Image, LogScale]:
    """
    ``log(img + eps)`` affinely rescaled to [0, 1].

    The default range is the fixed interval ``[log eps, log(1 + eps)]`` spanned by [0, 1] inputs,
    so equal inputs map to equal outputs across images. ``adaptive`` uses the image's own
    min/max instead.

    Returns:
        The compressed image and the LogScale that inverts it.
    """
    scale = _log_scale(img.pixels, eps, adaptive, img.shape)
    return Image(pixels=_compress(img.pixels, scale)), scale


def log_compress_stack(
    stack: ImageStack, eps: float = DEFAULT_EPS, adaptive: bool = False
) -> Tuple[ImageStack, LogScale]:
    """Log-compress every frame with one shared scale."""
    scale = _log_scale(stack.frames, eps, adaptive, stack.frame_shape)
    return ImageStack(frames=_compress(stack.frames, scale)), scale


def exp_decompress(img: Image, scale: LogScale) -> Image:
    """
    Invert :func:`log_compress`. Results are clamped to [0, 1].

    Raises:
        InvalidInputError: if ``scale`` was recorded for a different image shape.
    """
    if tuple(img.shape) != tuple(scale.shape):
        raise InvalidInputError(message=f"LogScale recorded for {scale.shape}, image is {img.shape}")
    values = np.exp(scale.lo + img.pixels * (scale.hi - scale.lo)) - scale.eps
    return Image(pixels=np.clip(values, 0.0, 1.0))
