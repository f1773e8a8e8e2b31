import math
from typing import Annotated, Any, Dict, Iterator, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

from despeckle_core.exceptions import InvalidInputError


def as_readonly_array(v: Any) -> np.ndarray:
    """
    Coerce array-likes to a read-only float64 ndarray.
    Arrays that already are read-only float64 are reused as is.
    """
    if isinstance(v, np.ndarray) and v.dtype == np.float64 and not v.flags.writeable:
        return v
    arr = np.array(v, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


# Reusable immutable float array type with automatic conversion
FloatArray = Annotated[np.ndarray, BeforeValidator(as_readonly_array)]


class CoreModel(BaseModel):
    """
    Base Pydantic model for all despeckle-core value objects.

    Features:
    - Frozen (results are safe to share between threads)
    - Arbitrary types enabled (numpy arrays)
    """

    model_config = ConfigDict(
        frozen=True,
        arbitrary_types_allowed=True,
    )


def _require(condition: bool, message: str, **data: Any) -> None:
    if not condition:
        raise InvalidInputError(message=message, data=data or None)


class DataMatrix(CoreModel):
    """
    N x P observation matrix: one vectorized B-scan per row, in acquisition order.

    Memory is 8·N·P bytes; 50 frames of 512x1000 take about 205 MB.
    """

    values: FloatArray = Field(..., description="N rows (channels) by P columns (samples).")

    @model_validator(mode="after")
    def _check(self) -> "DataMatrix":
        v = self.values
        _require(v.ndim == 2, "DataMatrix must be 2-D", shape=v.shape)
        n, p = v.shape
        _require(n >= 2, "DataMatrix needs at least 2 rows", shape=v.shape)
        _require(p >= n, "DataMatrix needs at least as many columns as rows", shape=v.shape)
        _require(bool(np.isfinite(v).all()), "DataMatrix entries must be finite")
        return self

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]


class WhiteningResult(CoreModel):
    """Outcome of eigendecomposition whitening."""

    q: FloatArray = Field(..., description="d x N whitening matrix.")
    q_pinv: FloatArray = Field(..., description="N x d pseudo-inverse of q.")
    means: FloatArray = Field(..., description="Per-channel means removed before whitening.")
    retained_dim: int = Field(..., ge=1)
    eigenvalues: FloatArray = Field(..., description="All N covariance eigenvalues, descending.")


class UnmixingResult(CoreModel):
    """Estimated unmixing of a DataMatrix by one ICA algorithm."""

    algorithm: str
    w: FloatArray = Field(..., description="d x d unmixing matrix in whitened space.")
    w_total: FloatArray = Field(..., description="d x N unmixing matrix, w composed with the whitening.")
    sources: FloatArray = Field(..., description="d x P estimated sources.")
    mixing: FloatArray = Field(..., description="N x d mixing estimate.")
    means: FloatArray = Field(..., description="Channel means, added back after extraction.")
    iterations: int = Field(..., ge=0)
    converged: bool
    elapsed_seconds: float = 0.0
    warnings: Tuple[str, ...] = ()
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    whitening: Optional[WhiteningResult] = Field(None, description="Whitening the sources were extracted from.")


class JointDiagonalization(CoreModel):
    """Orthogonal joint diagonalizer of a matrix set."""

    u: FloatArray
    sweeps: int
    converged: bool
    energy_history: Tuple[float, ...] = Field(
        (), description="offdiag energy before the first sweep and after every sweep."
    )


class Image(CoreModel):
    """Grayscale image with finite intensities in [0, 1]."""

    pixels: FloatArray

    @model_validator(mode="after")
    def _check(self) -> "Image":
        px = self.pixels
        _require(px.ndim == 2, "Image must be 2-D", shape=px.shape)
        _require(px.size > 0, "Image must not be empty")
        _require(bool(np.isfinite(px).all()), "Image pixels must be finite")
        _require(float(px.min()) >= 0.0 and float(px.max()) <= 1.0, "Image pixels must lie in [0, 1]")
        return self

    @classmethod
    def from_array(cls, arr: Any, clip: bool = True) -> "Image":
        """Build an Image, clamping to [0, 1] unless ``clip`` is False."""
        arr = np.asarray(arr, dtype=np.float64)
        if clip:
            arr = np.clip(arr, 0.0, 1.0)
        return cls(pixels=arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pixels.shape


class ImageStack(CoreModel):
    """N co-located B-scans of identical dimensions, in acquisition order."""

    frames: FloatArray = Field(..., description="N x H x W array.")

    @model_validator(mode="after")
    def _check(self) -> "ImageStack":
        f = self.frames
        _require(f.ndim == 3, "ImageStack must be N x H x W", shape=f.shape)
        _require(f.shape[0] >= 1, "ImageStack needs at least one frame")
        _require(bool(np.isfinite(f).all()), "ImageStack pixels must be finite")
        _require(float(f.min()) >= 0.0 and float(f.max()) <= 1.0, "ImageStack pixels must lie in [0, 1]")
        return self

    @classmethod
    def from_images(cls, images: Sequence[Image]) -> "ImageStack":
        shapes = {img.shape for img in images}
        _require(len(images) >= 1, "ImageStack needs at least one frame")
        _require(len(shapes) == 1, "All frames must have identical dimensions", shapes=sorted(shapes))
        return cls(frames=np.stack([img.pixels for img in images]))

    def __len__(self) -> int:
        return self.frames.shape[0]

    def __getitem__(self, index: int) -> Image:
        return Image(pixels=self.frames[index])

    def images(self) -> Iterator[Image]:
        for i in range(len(self)):
            yield self[i]

    @property
    def frame_shape(self) -> Tuple[int, int]:
        return self.frames.shape[1], self.frames.shape[2]

    def first(self, n: int) -> "ImageStack":
        """The first ``n`` frames in acquisition order."""
        _require(1 <= n <= len(self), f"Cannot take {n} frames from a stack of {len(self)}")
        return ImageStack(frames=self.frames[:n])


def _wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


class RigidTransform(CoreModel):
    """
    Translation + rotation about the image center.

    A point p maps to R(theta)·(p - c) + c + (dx, dy), with x along columns and y along rows.
    """

    dx: float = 0.0
    dy: float = 0.0
    theta: float = Field(0.0, ge=-math.pi, le=math.pi, description="radians")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @property
    def is_identity(self) -> bool:
        return self.dx == 0.0 and self.dy == 0.0 and self.theta == 0.0

    @property
    def theta_deg(self) -> float:
        return math.degrees(self.theta)

    def inverse(self) -> "RigidTransform":
        c, s = math.cos(self.theta), math.sin(self.theta)
        # -R(-theta)·d
        dx = -(c * self.dx + s * self.dy)
        dy = -(-s * self.dx + c * self.dy)
        return RigidTransform(dx=dx, dy=dy, theta=_wrap_angle(-self.theta))

    def then(self, other: "RigidTransform") -> "RigidTransform":
        """Composition applying ``self`` first and ``other`` second."""
        c, s = math.cos(other.theta), math.sin(other.theta)
        dx = c * self.dx - s * self.dy + other.dx
        dy = s * self.dx + c * self.dy + other.dy
        return RigidTransform(dx=dx, dy=dy, theta=_wrap_angle(self.theta + other.theta))

    def scaled(self, fx: float, fy: Optional[float] = None) -> "RigidTransform":
        """The same motion expressed on an image resampled by ``fx`` along x and ``fy`` along y."""
        fy = fx if fy is None else fy
        return RigidTransform(dx=self.dx * fx, dy=self.dy * fy, theta=self.theta)

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.dx, self.dy, self.theta
