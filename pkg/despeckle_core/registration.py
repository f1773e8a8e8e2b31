"""
Rigid (translation + rotation) registration of B-scans.

Conventions: x runs along columns, y along rows, rotations are about the image center
``((W-1)/2, (H-1)/2)``. ``estimate_*(ref, mov)`` return the transform ``t`` with
``mov ≈ warp_rigid(ref, t)``; aligning ``mov`` onto ``ref`` is ``warp_rigid(mov, t.inverse())``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage, optimize
from scipy.signal import windows

from despeckle_core.exceptions import InvalidInputError, NoSignalError, RegistrationFailedError
from despeckle_core.schemas import CoreModel, Image, ImageStack, RigidTransform

ImageLike = Union[Image, np.ndarray]

MIN_OVERLAP = 0.25
THETA_XATOL_DEG = 0.01
_MIN_PYRAMID_SIZE = 48
_FLAT = 1e-12
# Gaussian low-pass width of the cross-power spectrum, cycles/pixel
CROSS_POWER_BAND = 0.08
# initial simplex size and largest accepted move of the joint refinement, in pixels
REFINE_STEP = 0.5
REFINE_REACH = 3.0
REFINE_XATOL = 1e-3


class RegistrationConfig(BaseModel):
    """Settings of stack registration; angles in degrees."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    enabled: bool = True
    theta_range: float = Field(5.0, ge=0, le=180)
    theta_step: float = Field(0.5, gt=0)
    min_quality: float = Field(0.5, ge=-1, le=1, description="Frames whose smoothed NCC is lower are flagged.")
    levels: int = Field(3, ge=1, description="Pyramid levels, 2x downsampling per level.")
    smooth_sigma: float = Field(2.0, ge=0, description="Gaussian prefilter applied before estimation and scoring.")
    workers: int = Field(4, ge=1)


class RigidMatch(CoreModel):
    """A transform estimate with its NCC score and the overlap fraction it was scored on."""

    transform: RigidTransform
    ncc: float
    overlap: float


class RegistrationResult(CoreModel):
    stack: ImageStack
    transforms: Tuple[RigidTransform, ...]
    quality: Tuple[float, ...]
    flagged: Tuple[bool, ...]
    warnings: Tuple[str, ...] = ()


def _pixels(img: ImageLike) -> np.ndarray:
    return img.pixels if isinstance(img, Image) else np.asarray(img, dtype=np.float64)


def _check_pair(ref: np.ndarray, mov: np.ndarray) -> None:
    if ref.shape != mov.shape or ref.ndim != 2:
        raise InvalidInputError(message=f"Images must share one 2-D shape, got {ref.shape} and {mov.shape}")


def _grid_through(shape: Tuple[int, int], t: RigidTransform) -> Tuple[np.ndarray, np.ndarray]:
    """Row/column coordinates ``t(q)`` for every pixel q of the grid."""
    h, w = shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    c, s = math.cos(t.theta), math.sin(t.theta)
    px, py = xx - cx, yy - cy
    return s * px + c * py + cy + t.dy, c * px - s * py + cx + t.dx


def _inside(shape: Tuple[int, int], rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    h, w = shape
    return (rows >= 0) & (rows <= h - 1) & (cols >= 0) & (cols <= w - 1)


def _warp(pixels: np.ndarray, t: RigidTransform, fill: Optional[float] = None) -> np.ndarray:
    if t.is_identity:
        return pixels.copy()
    fill = float(pixels.mean()) if fill is None else fill
    rows, cols = _grid_through(pixels.shape, t.inverse())
    out = ndimage.map_coordinates(pixels, [rows, cols], order=1, mode="constant", cval=fill)
    out[~_inside(pixels.shape, rows, cols)] = fill
    return out


def warp_rigid(img: Image, t: RigidTransform) -> Image:
    """
    Move the content of ``img`` by ``t``: inverse-mapped bilinear interpolation, out-of-bounds
    samples filled with the image mean, result clamped to [0, 1]. The identity is an exact copy.
    """
    pixels = _pixels(img)
    if t.is_identity:
        return Image(pixels=pixels.copy())
    return Image(pixels=np.clip(_warp(pixels, t), 0.0, 1.0))


def _ncc(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float((a * a).sum()) * float((b * b).sum()))
    return float((a * b).sum()) / denom if denom > 0 else 0.0


def score_transform(ref: ImageLike, mov: ImageLike, t: RigidTransform) -> Tuple[float, float]:
    """
    NCC between ``ref`` and ``mov`` aligned by ``t``, over the pixels where both are defined.

    Returns:
        ``(ncc, overlap_fraction)``.

    Raises:
        RegistrationFailedError: when the overlap is below 25% of the image area.
    """
    r, m = _pixels(ref), _pixels(mov)
    _check_pair(r, m)
    rows, cols = _grid_through(r.shape, t)
    valid = _inside(r.shape, rows, cols)
    overlap = float(valid.mean())
    if overlap < MIN_OVERLAP:
        raise RegistrationFailedError(
            message=f"Overlap {overlap:.1%} below {MIN_OVERLAP:.0%}", data={"transform": t.as_tuple()}
        )
    sampled = ndimage.map_coordinates(m, [rows[valid], cols[valid]], order=1)
    return _ncc(r[valid], sampled), overlap


def _parabolic(c_minus: float, c_zero: float, c_plus: float) -> float:
    # a Gaussian peak is a parabola in log space
    if min(c_minus, c_zero, c_plus) > 0:
        c_minus, c_zero, c_plus = math.log(c_minus), math.log(c_zero), math.log(c_plus)
    denom = c_minus - 2.0 * c_zero + c_plus
    if denom == 0:
        return 0.0
    return float(np.clip(0.5 * (c_minus - c_plus) / denom, -0.5, 0.5))


def _band_mask(shape: Tuple[int, int], band: float) -> np.ndarray:
    fy = np.fft.fftfreq(shape[0])[:, None]
    fx = np.fft.fftfreq(shape[1])[None, :]
    return np.exp(-(fx**2 + fy**2) / (2.0 * band**2))


def _phase_correlate(ref: np.ndarray, mov: np.ndarray, band: float = CROSS_POWER_BAND) -> Tuple[float, float]:
    if ref.std() < _FLAT or mov.std() < _FLAT:
        raise NoSignalError(message="Cannot register a constant image")
    h, w = ref.shape
    window = np.outer(windows.hann(h, sym=False), windows.hann(w, sym=False)) if min(h, w) > 2 else 1.0
    f_ref = np.fft.fft2((ref - ref.mean()) * window)
    f_mov = np.fft.fft2((mov - mov.mean()) * window)
    cross = f_mov * np.conj(f_ref)
    magnitude = np.abs(cross)
    cross /= magnitude + _FLAT * max(float(magnitude.max()), _FLAT)
    cross *= _band_mask(ref.shape, band)
    surface = np.real(np.fft.ifft2(cross))

    py, px = np.unravel_index(int(np.argmax(surface)), surface.shape)
    oy = _parabolic(surface[(py - 1) % h, px], surface[py, px], surface[(py + 1) % h, px]) if h > 2 else 0.0
    ox = _parabolic(surface[py, (px - 1) % w], surface[py, px], surface[py, (px + 1) % w]) if w > 2 else 0.0
    dy = py - h if py > h // 2 else py
    dx = px - w if px > w // 2 else px
    return float(dx + ox), float(dy + oy)


def estimate_translation(ref: ImageLike, mov: ImageLike, band: float = CROSS_POWER_BAND) -> Tuple[float, float]:
    """
    Shift ``(dx, dy)`` with ``mov(p) ≈ ref(p - (dx, dy))``, by Hann-windowed phase correlation with
    sub-pixel refinement of the peak. Means are removed first.

    The whitened cross-power spectrum is weighted by a Gaussian low-pass of width ``band``
    (cycles/pixel). Pixel-scale speckle then no longer carries the same weight as the structure
    shared by both images, and the correlation peak becomes a Gaussian whose center is fitted by a
    parabola through the log of the three samples around the maximum.

    Raises:
        InvalidInputError: for mismatched shapes or a non-positive ``band``.
        NoSignalError: if either image is constant.
    """
    if band <= 0:
        raise InvalidInputError(message=f"band must be positive, got {band}")
    r, m = _pixels(ref), _pixels(mov)
    _check_pair(r, m)
    return _phase_correlate(r, m, band)


def _candidate(ref: np.ndarray, mov: np.ndarray, theta: float) -> Optional[RigidMatch]:
    derotated = _warp(mov, RigidTransform(theta=-theta)) if theta != 0.0 else mov
    sx, sy = _phase_correlate(ref, derotated)
    c, s = math.cos(theta), math.sin(theta)
    t = RigidTransform(dx=c * sx - s * sy, dy=s * sx + c * sy, theta=theta)
    try:
        ncc, overlap = score_transform(ref, mov, t)
    except RegistrationFailedError:
        return None
    return RigidMatch(transform=t, ncc=ncc, overlap=overlap)


def _theta_grid(theta_range: float, theta_step: float) -> np.ndarray:
    n = int(math.floor(theta_range / theta_step + 1e-9))
    grid = np.radians(theta_step * np.arange(-n, n + 1))
    return grid[np.argsort(np.abs(grid), kind="stable")]


def _estimate_rigid(ref: np.ndarray, mov: np.ndarray, theta_range: float, theta_step: float) -> RigidMatch:
    best: Optional[RigidMatch] = None
    for theta in _theta_grid(theta_range, theta_step):
        match = _candidate(ref, mov, float(theta))
        # strict comparison keeps the smaller |theta| on ties
        if match is not None and (best is None or match.ncc > best.ncc):
            best = match
    if best is None:
        raise RegistrationFailedError(message="No rotation candidate left enough overlap to score")

    if theta_range > 0:
        limit = math.radians(theta_range)
        center = best.transform.theta
        step = math.radians(theta_step)
        lo, hi = max(-limit, center - step), min(limit, center + step)

        def objective(theta: float) -> float:
            match = _candidate(ref, mov, theta)
            return 2.0 if match is None else -match.ncc

        res = optimize.minimize_scalar(
            objective, bounds=(lo, hi), method="bounded", options={"xatol": math.radians(THETA_XATOL_DEG)}
        )
        if -res.fun > best.ncc:
            refined = _candidate(ref, mov, float(res.x))
            if refined is not None:
                best = refined
    return best


def _refine_jointly(ref: np.ndarray, mov: np.ndarray, start: RigidTransform, fit_theta: bool = True) -> RigidTransform:
    """
    Nelder-Mead ascent of the NCC over ``(dx, dy, theta)`` from ``start``, sampling ``mov`` by cubic
    splines. Theta is scaled by half the image size so all three parameters move pixels alike. A
    result that scores lower than ``start`` or lands more than ``REFINE_REACH`` pixels away is
    discarded.
    """
    coeffs = ndimage.spline_filter(mov, order=3, mode="mirror")
    radius = 0.5 * max(ref.shape)

    def transform(p: np.ndarray) -> RigidTransform:
        theta = float(np.clip(p[2] / radius, -math.pi, math.pi)) if fit_theta else start.theta
        return RigidTransform(dx=float(p[0]), dy=float(p[1]), theta=theta)

    def objective(p: np.ndarray) -> float:
        rows, cols = _grid_through(ref.shape, transform(p))
        valid = _inside(ref.shape, rows, cols)
        if valid.mean() < MIN_OVERLAP:
            return 2.0
        sampled = ndimage.map_coordinates(coeffs, [rows[valid], cols[valid]], order=3, mode="mirror", prefilter=False)
        return -_ncc(ref[valid], sampled)

    x0 = np.array([start.dx, start.dy, start.theta * radius] if fit_theta else [start.dx, start.dy])
    simplex = np.vstack([x0, x0 + REFINE_STEP * np.eye(len(x0))])
    res = optimize.minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": REFINE_XATOL, "fatol": 1e-12, "maxiter": 100 * len(x0)},
    )
    if res.fun > objective(x0) or np.abs(res.x - x0).max() > REFINE_REACH:
        logger.debug(f"joint refinement rejected (moved {np.abs(res.x - x0).max():.2f} px)")
        return start
    return transform(res.x)


def estimate_rigid(
    ref: ImageLike, mov: ImageLike, theta_range: float = 5.0, theta_step: float = 0.5
) -> RigidMatch:
    """
    Grid search over ``theta ∈ [-theta_range, theta_range]`` (degrees) at ``theta_step``: each
    candidate de-rotates ``mov``, recovers the translation by phase correlation and is scored by
    NCC on the valid overlap. The best angle is refined by bounded scalar minimization to 0.01°,
    then ``(dx, dy, theta)`` are refined together by maximizing the NCC. Ties go to the smaller
    ``|theta|``; a zero ``theta_range`` keeps theta at exactly 0.

    Returns:
        RigidMatch with the transform, its NCC (the quality score) and the overlap fraction.

    Raises:
        InvalidInputError: for mismatched shapes or a negative range / non-positive step.
        NoSignalError: if either image is constant.
        RegistrationFailedError: when no candidate keeps 25% overlap.
    """
    if theta_range < 0 or theta_step <= 0:
        raise InvalidInputError(message=f"Invalid theta grid: range {theta_range}, step {theta_step}")
    r, m = _pixels(ref), _pixels(mov)
    _check_pair(r, m)
    best = _estimate_rigid(r, m, theta_range, theta_step)
    t = _refine_jointly(r, m, best.transform, fit_theta=theta_range > 0)
    ncc, overlap = score_transform(r, m, t)
    return RigidMatch(transform=t, ncc=ncc, overlap=overlap)


def _pyramid(pixels: np.ndarray, levels: int, sigma: float) -> List[np.ndarray]:
    """Finest first."""
    base = ndimage.gaussian_filter(pixels, sigma) if sigma > 0 else pixels
    out = [base]
    while len(out) < levels and min(out[-1].shape) >= 2 * _MIN_PYRAMID_SIZE:
        out.append(ndimage.zoom(ndimage.gaussian_filter(out[-1], 1.0), 0.5, order=1))
    return out


def _register_frame(
    ref_pyramid: List[np.ndarray], mov: np.ndarray, config: RegistrationConfig
) -> RigidMatch:
    """Coarse-to-fine estimate, scored by NCC on the smoothed finest level."""
    mov_pyramid = _pyramid(mov, len(ref_pyramid), config.smooth_sigma)
    fit_theta = config.theta_range > 0
    estimate = RigidTransform.identity()
    for level in range(len(ref_pyramid) - 1, -1, -1):
        r, m = ref_pyramid[level], mov_pyramid[level]
        if level == len(ref_pyramid) - 1:
            theta_range, theta_step = config.theta_range, config.theta_step
        else:
            theta_range = 2.0 * config.theta_step if fit_theta else 0.0
            theta_step = config.theta_step / 2.0
        residual_input = _warp(m, estimate.inverse())
        residual = _estimate_rigid(r, residual_input, theta_range, theta_step)
        estimate = _refine_jointly(r, m, residual.transform.then(estimate), fit_theta)
        if level > 0:
            finer = ref_pyramid[level - 1]
            fx = (finer.shape[1] - 1) / (r.shape[1] - 1)
            fy = (finer.shape[0] - 1) / (r.shape[0] - 1)
            estimate = estimate.scaled(fx, fy)
    ncc, overlap = score_transform(ref_pyramid[0], mov_pyramid[0], estimate)
    return RigidMatch(transform=estimate, ncc=ncc, overlap=overlap)


def register_stack(stack: ImageStack, config: Optional[RegistrationConfig] = None) -> RegistrationResult:
    """
    Align every frame of ``stack`` to its first frame.

    Each frame is registered coarse-to-fine over a Gaussian pyramid, a full angle search at the
    coarsest level and residual searches below it, each level closed by a joint NCC refinement of
    ``(dx, dy, theta)``. A frame scores the NCC between the ``smooth_sigma``-filtered frames, so
    speckle that differs between acquisitions does not dominate it. Frames are processed
    concurrently. A frame whose registration fails keeps the identity transform; it and any frame
    scoring below ``config.min_quality`` are flagged, never dropped.

    Returns:
        RegistrationResult with N transforms and scores (frame 0: identity, score 1).

    Raises:
        InvalidInputError: for stacks with fewer than two frames.
    """
    config = config or RegistrationConfig()
    n = len(stack)
    if n < 2:
        raise InvalidInputError(message=f"Registration needs at least 2 frames, got {n}")

    ref = stack.frames[0]
    ref_pyramid = _pyramid(ref, config.levels, config.smooth_sigma)

    def job(i: int) -> Tuple[RigidTransform, float, Optional[str]]:
        mov = stack.frames[i]
        try:
            match = _register_frame(ref_pyramid, mov, config)
            return match.transform, match.ncc, None
        except (RegistrationFailedError, NoSignalError) as e:
            logger.warning(f"registration of frame {i} failed: {e}")
            ncc = _ncc(ref, mov) if ref.std() > _FLAT and mov.std() > _FLAT else 0.0
            return RigidTransform.identity(), ncc, f"frame {i}: registration failed ({e})"

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        outcomes = list(pool.map(job, range(1, n)))

    transforms = [RigidTransform.identity()]
    quality = [1.0]
    flagged = [False]
    warnings: List[str] = []
    aligned = [ref.copy()]
    for i, (t, ncc, failure) in enumerate(outcomes, start=1):
        transforms.append(t)
        quality.append(ncc)
        low = failure is not None or ncc < config.min_quality
        flagged.append(low)
        if failure is not None:
            warnings.append(failure)
        elif low:
            warnings.append(f"frame {i}: low registration quality (NCC {ncc:.3f})")
            logger.warning(warnings[-1])
        aligned.append(np.clip(_warp(stack.frames[i], t.inverse()), 0.0, 1.0))
        logger.debug(
            f"frame {i}: dx={t.dx:.2f} dy={t.dy:.2f} theta={t.theta_deg:.3f}deg ncc={ncc:.4f}"
        )

    return RegistrationResult(
        stack=ImageStack(frames=np.stack(aligned)),
        transforms=tuple(transforms),
        quality=tuple(quality),
        flagged=tuple(flagged),
        warnings=tuple(warnings),
    )
