"""
End-to-end despeckling experiment.

ingest -> register -> log domain -> data matrix -> ICA or baseline -> component selection ->
reconstruction -> ROI metrics, for every (subset size N, algorithm) cell.
"""

import csv
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from despeckle_core.config import ConfigManagement
from despeckle_core.context import cell_context
from despeckle_core.exceptions import ConfigError, DespeckleException, InvalidInputError, SelectionAmbiguousError
from despeckle_core.ica import ICA_ALGORITHMS, IcaConfig, run_ica
from despeckle_core.ica.base import parse_int_list
from despeckle_core.imageio import read_stack_dir, write_pgm
from despeckle_core.metrics import MetricsReport, RoiSet, evaluate, load_rois
from despeckle_core.registration import RegistrationConfig, register_stack
from despeckle_core.schemas import (
    CoreModel,
    DataMatrix,
    Image,
    ImageStack,
    RigidTransform,
    UnmixingResult,
    WhiteningResult,
)
from despeckle_core.speckle import (
    DEFAULT_EPS,
    LogScale,
    PhantomConfig,
    SpeckleConfig,
    exp_decompress,
    generate_speckle_stack,
    log_compress,
    log_compress_stack,
    make_phantom,
)
from despeckle_core.timing import Stopwatch

BASELINES = ("median", "average")
ALGORITHMS = ICA_ALGORITHMS + BASELINES
MIN_SELECTION_CORRELATION = 0.2
REPORT_HEADER = ["algorithm", "n_frames", "roi_id", "snr_db", "cnr", "enl", "elapsed_s", "converged"]
INPUT_ROW = "input"


# --------------------------------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------------------------------


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class InputSection(_Section):
    source: Literal["phantom", "directory"] = "phantom"
    directory: Optional[str] = Field(None, description="Folder of PGM frames, sorted by filename.")

    @model_validator(mode="after")
    def _check(self) -> "InputSection":
        if self.source == "directory" and not self.directory:
            raise ValueError("input.directory is required when input.source = directory")
        return self


class PhantomSection(_Section):
    """Synthetic input: the default phantom under L-look speckle and rigid jitter."""

    height: int = Field(128, ge=32)
    width: int = Field(128, ge=32)
    looks: float = Field(4.0, gt=0)
    n_frames: int = Field(50, ge=1)
    jitter_dx: float = Field(0.0, ge=0)
    jitter_dy: float = Field(0.0, ge=0)
    jitter_theta: float = Field(0.0, ge=0)

    @property
    def zero_jitter(self) -> bool:
        return self.jitter_dx == 0 and self.jitter_dy == 0 and self.jitter_theta == 0


class RunSection(_Section):
    algorithms: List[str] = Field(default_factory=lambda: list(ALGORITHMS))
    subset_sizes: List[int] = Field(default_factory=lambda: list(range(5, 55, 5)))
    log_domain: bool = True
    eps: float = Field(DEFAULT_EPS, gt=0)
    output_dir: Optional[str] = None
    seed: int = Field(0, ge=0, lt=2**64)
    workers: int = Field(1, ge=1)
    timing: bool = Field(False, description="Serialize cells so elapsed times are not skewed.")
    write_images: bool = True

    @field_validator("algorithms", mode="before")
    @classmethod
    def _parse_algorithms(cls, v: Any) -> Any:
        return [t.strip().lower() for t in v.split(",") if t.strip()] if isinstance(v, str) else v

    @field_validator("algorithms")
    @classmethod
    def _check_algorithms(cls, v: List[str]) -> List[str]:
        if not v:
            raise ValueError("at least one algorithm must be selected")
        unknown = sorted(set(v) - set(ALGORITHMS))
        if unknown:
            raise ValueError(f"unknown algorithms {unknown}; expected a subset of {list(ALGORITHMS)}")
        return list(dict.fromkeys(v))

    @field_validator("subset_sizes", mode="before")
    @classmethod
    def _parse_sizes(cls, v: Any) -> Any:
        return parse_int_list(v)

    @field_validator("subset_sizes")
    @classmethod
    def _check_sizes(cls, v: List[int]) -> List[int]:
        if not v or min(v) < 1:
            raise ValueError("subset_sizes must be non-empty positive integers")
        return sorted(set(v))


class MetricsSection(_Section):
    rois: Optional[str] = Field(None, description="ROI file; defaults to the phantom ROIs.")
    domain: Literal["log", "linear"] = "log"


class PipelineConfig(_Section):
    """
    Full run configuration. ``ica`` holds the shared estimator settings; ``ica.<algorithm>`` ini
    sections override them for one algorithm.
    """

    input: InputSection = Field(default_factory=InputSection)
    phantom: PhantomSection = Field(default_factory=PhantomSection)
    registration: RegistrationConfig = Field(default_factory=RegistrationConfig)
    run: RunSection = Field(default_factory=RunSection)
    metrics: MetricsSection = Field(default_factory=MetricsSection)
    ica: IcaConfig = Field(default_factory=IcaConfig)
    ica_overrides: Dict[str, Dict[str, Any]] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _split_ica_sections(cls, data: Any) -> Any:
        if isinstance(data, dict) and isinstance(data.get("ica"), dict):
            data = dict(data)
            ica = dict(data["ica"])
            overrides = dict(data.get("ica_overrides") or {})
            for name in list(ica):
                if isinstance(ica[name], dict):
                    overrides[name] = ica.pop(name)
            data["ica"] = ica
            data["ica_overrides"] = overrides
        return data

    @model_validator(mode="after")
    def _check(self) -> "PipelineConfig":
        unknown = sorted(set(self.ica_overrides) - set(ICA_ALGORITHMS))
        if unknown:
            raise ValueError(f"unknown ica sections {unknown}")
        for name in self.ica_overrides:
            self.ica_for(name)
        if self.input.source == "phantom" and max(self.run.subset_sizes) > self.phantom.n_frames:
            raise ValueError(
                f"subset size {max(self.run.subset_sizes)} exceeds phantom.n_frames = {self.phantom.n_frames}"
            )
        return self

    def ica_for(self, algorithm: str) -> IcaConfig:
        """Estimator settings of one algorithm; ``run.seed`` applies unless a seed is set explicitly."""
        merged = self.ica.model_dump(exclude_unset=True)
        merged.update(self.ica_overrides.get(algorithm, {}))
        merged.setdefault("seed", self.run.seed)
        merged["algorithm"] = algorithm
        return IcaConfig(**merged)


# --------------------------------------------------------------------------------------------------
# report types
# --------------------------------------------------------------------------------------------------


class ComponentSelection(CoreModel):
    """Which source row carries the image, and the affine map putting it back on the reference scale."""

    index: int
    sign: float
    scale: float
    offset: float
    correlation: float


class CellReport(CoreModel):
    algorithm: str
    n_frames: int
    metrics: Optional[MetricsReport] = None
    elapsed_seconds: Optional[float] = None
    converged: bool = False
    iterations: Optional[int] = None
    selection: Optional[ComponentSelection] = None
    image_path: Optional[str] = None
    warnings: Tuple[str, ...] = ()
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


class RegistrationSummary(CoreModel):
    transforms: Tuple[RigidTransform, ...]
    quality: Tuple[float, ...]
    flagged: Tuple[bool, ...]


class RunReport(CoreModel):
    cells: Tuple[CellReport, ...]
    input_metrics: MetricsReport
    domain: str = Field(..., description="Intensity domain the metrics were computed in.")
    registration: Optional[RegistrationSummary] = None
    output_dir: Optional[str] = None
    warnings: Tuple[str, ...] = ()

    def cell(self, algorithm: str, n_frames: int) -> CellReport:
        for c in self.cells:
            if c.algorithm == algorithm and c.n_frames == n_frames:
                return c
        raise KeyError((algorithm, n_frames))


# --------------------------------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------------------------------


def build_data_matrix(aligned: Union[ImageStack, Sequence[Image]]) -> DataMatrix:
    """
    Row ``i`` is the row-major vectorization of frame ``i``; ``P = H·W``.

    Raises:
        InvalidInputError: for frames of differing dimensions or fewer than two frames.
    """
    stack = aligned if isinstance(aligned, ImageStack) else ImageStack.from_images(list(aligned))
    return DataMatrix(values=stack.frames.reshape(len(stack), -1))


def median_baseline(aligned: ImageStack) -> Image:
    """Pixelwise temporal median (mean of the two central values for even N)."""
    return Image.from_array(np.median(aligned.frames, axis=0))


def average_baseline(aligned: ImageStack) -> Image:
    return Image.from_array(aligned.frames.mean(axis=0))


def select_signal_component(
    result: UnmixingResult, whitening: Optional[WhiteningResult], reference: Image
) -> ComponentSelection:
    """
    Pick the source most correlated (in absolute Pearson value) with ``reference``, fix its sign
    and fit ``reference ≈ scale·(sign·source) + offset`` by least squares.

    Raises:
        InvalidInputError: if source length and reference geometry disagree, or the whitening
            record does not match the number of sources.
        SelectionAmbiguousError: when the best absolute correlation is below 0.2; ``data`` lists
            the top-3 ``(index, correlation)`` candidates.
    """
    sources = result.sources
    ref = reference.pixels.reshape(-1)
    if sources.shape[1] != ref.size:
        raise InvalidInputError(message=f"Sources have {sources.shape[1]} samples, reference has {ref.size} pixels")
    if whitening is not None and whitening.retained_dim != sources.shape[0]:
        raise InvalidInputError(
            message=f"Whitening kept {whitening.retained_dim} dimensions, result has {sources.shape[0]} sources"
        )

    centered = sources - sources.mean(axis=1, keepdims=True)
    ref_c = ref - ref.mean()
    norms = np.linalg.norm(centered, axis=1) * np.linalg.norm(ref_c)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(norms > 0, centered @ ref_c / norms, 0.0)

    order = np.argsort(-np.abs(corr), kind="stable")
    best = int(order[0])
    if abs(corr[best]) < MIN_SELECTION_CORRELATION:
        top = [(int(i), float(corr[i])) for i in order[:3]]
        raise SelectionAmbiguousError(
            message=f"No source correlates with the reference (best |r| = {abs(corr[best]):.3f})", data=top
        )

    sign = 1.0 if corr[best] >= 0 else -1.0
    component = sign * sources[best]
    comp_c = component - component.mean()
    scale = float(comp_c @ ref_c / (comp_c @ comp_c))
    offset = float(ref.mean() - scale * component.mean())
    return ComponentSelection(index=best, sign=sign, scale=scale, offset=offset, correlation=float(abs(corr[best])))


def reconstruct_image(
    component: np.ndarray, sign: float, scale: float, offset: float, geometry: Tuple[int, int]
) -> Image:
    """
    ``clip(scale·sign·component + offset)`` reshaped row-major to ``geometry``.

    Raises:
        InvalidInputError: when the component length is not ``H·W``.
    """
    values = np.asarray(component, dtype=np.float64)
    h, w = geometry
    if values.size != h * w:
        raise InvalidInputError(message=f"Component of length {values.size} does not fit {h}x{w}")
    if sign == 1.0 and scale == 1.0 and offset == 0.0:
        return Image.from_array(values.reshape(h, w))
    return Image.from_array((scale * sign * values + offset).reshape(h, w))


def _load_input(config: PipelineConfig) -> Tuple[ImageStack, bool]:
    """The stack, and whether it is known to need no registration."""
    if config.input.source == "directory":
        return read_stack_dir(config.input.directory), False
    clean = make_phantom(PhantomConfig(height=config.phantom.height, width=config.phantom.width))
    speckle = SpeckleConfig(
        looks=config.phantom.looks,
        n_frames=config.phantom.n_frames,
        jitter_dx=config.phantom.jitter_dx,
        jitter_dy=config.phantom.jitter_dy,
        jitter_theta=config.phantom.jitter_theta,
        seed=config.run.seed,
    )
    stack, _ = generate_speckle_stack(clean, speckle)
    return stack, config.phantom.zero_jitter


def _load_rois(config: PipelineConfig) -> RoiSet:
    if config.metrics.rois:
        return load_rois(config.metrics.rois)
    if config.input.source == "directory":
        raise ConfigError(message="metrics.rois is required for directory input")
    return load_rois()


class _Domain:
    """Conversion from the processing domain to the metric domain."""

    def __init__(self, processing: str, metric: str, scale: Optional[LogScale], eps: float) -> None:
        self.processing = processing
        self.metric = metric
        self.scale = scale
        self.eps = eps

    def to_metric(self, img: Image) -> Image:
        if self.processing == self.metric:
            return img
        if self.processing == "log":
            return exp_decompress(img, self.scale)
        return log_compress(img, self.eps)[0]


def _cell_rows(cell: CellReport) -> List[List[Any]]:
    elapsed = "" if cell.elapsed_seconds is None else repr(float(cell.elapsed_seconds))
    converged = str(cell.converged).lower()
    if cell.metrics is None:
        return [[cell.algorithm, cell.n_frames, "error", "", "", "", elapsed, converged]]
    m = cell.metrics
    rows = [
        [cell.algorithm, cell.n_frames, r.roi_id, repr(r.snr_db), repr(r.cnr), repr(r.enl), elapsed, converged]
        for r in m.rows
    ]
    means = [repr(m.mean_snr_db), repr(m.mean_cnr), repr(m.mean_enl)]
    rows.append([cell.algorithm, cell.n_frames, "mean", *means, elapsed, converged])
    return rows


def write_report_csv(report: RunReport, path: Union[str, Path]) -> Path:
    """One row per (algorithm, N, feature ROI) plus a ``mean`` row per cell; the input frame first."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    input_cell = CellReport(algorithm=INPUT_ROW, n_frames=1, metrics=report.input_metrics, converged=True)
    with p.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for cell in (input_cell, *report.cells):
            writer.writerows(_cell_rows(cell))
    return p


def _run_cell(
    algorithm: str,
    n: int,
    stack: ImageStack,
    config: PipelineConfig,
    rois: RoiSet,
    domain: _Domain,
    out_dir: Optional[Path],
) -> CellReport:
    label = f"{algorithm}/n={n}"
    with cell_context(label):
        try:
            sub = stack.first(n)
            selection = None
            iterations = None
            warnings: Tuple[str, ...] = ()
            if algorithm in BASELINES:
                with Stopwatch(label) as sw:
                    img = median_baseline(sub) if algorithm == "median" else average_baseline(sub)
                elapsed, converged = sw.elapsed, True
            else:
                result = run_ica(build_data_matrix(sub), config.ica_for(algorithm))
                selection = select_signal_component(result, result.whitening, median_baseline(sub))
                img = reconstruct_image(
                    result.sources[selection.index],
                    selection.sign,
                    selection.scale,
                    selection.offset,
                    stack.frame_shape,
                )
                elapsed, converged = result.elapsed_seconds, result.converged
                iterations = result.iterations
                warnings = result.warnings

            display = domain.to_metric(img)
            metrics = evaluate(display, rois).model_copy(update={"elapsed_seconds": elapsed})
            image_path = None
            if out_dir is not None and config.run.write_images:
                image_path = str(write_pgm(display, out_dir / f"{algorithm}_n{n}.pgm"))
            logger.info(f"{label}: SNR {metrics.mean_snr_db:.2f} dB, CNR {metrics.mean_cnr:.3f}, {elapsed:.3f}s")
            return CellReport(
                algorithm=algorithm,
                n_frames=n,
                metrics=metrics,
                elapsed_seconds=elapsed,
                converged=converged,
                iterations=iterations,
                selection=selection,
                image_path=image_path,
                warnings=warnings + metrics.warnings,
            )
        except DespeckleException as e:
            logger.error(f"{label} failed: {e}")
            return CellReport(algorithm=algorithm, n_frames=n, error=f"{type(e).__name__}: {e}")
        except Exception as e:
            logger.exception(f"{label} failed unexpectedly")
            return CellReport(algorithm=algorithm, n_frames=n, error=f"{type(e).__name__}: {e}")


def run_pipeline(config: PipelineConfig) -> RunReport:
    """
    Run every requested (N, algorithm) cell and collect a RunReport.

    Subsets are the first N frames in acquisition order. Registration runs once on the largest
    subset, so smaller subsets reuse the same alignment; it is skipped when disabled or for a
    zero-jitter phantom. Cells run concurrently on ``run.workers`` threads, one at a time when
    ``run.timing`` is set. A failing cell is recorded and the run continues. Outputs
    (``<algorithm>_n<N>.pgm`` and ``report.csv``) go to ``run.output_dir`` when set.

    Raises:
        ConfigError: for missing ROI configuration.
        InvalidInputError: when a subset size exceeds the available frames or input is unreadable.
    """
    stack, pre_aligned = _load_input(config)
    rois = _load_rois(config)
    max_n = max(config.run.subset_sizes)
    if max_n > len(stack):
        raise InvalidInputError(message=f"Subset size {max_n} exceeds the {len(stack)} available frames")
    stack = stack.first(max_n)
    warnings: List[str] = []

    registration = None
    if config.registration.enabled and not pre_aligned and len(stack) > 1:
        with Stopwatch("registration", level="INFO"):
            reg = register_stack(stack, config.registration)
        stack = reg.stack
        warnings.extend(reg.warnings)
        registration = RegistrationSummary(transforms=reg.transforms, quality=reg.quality, flagged=reg.flagged)
    else:
        logger.info("registration skipped")

    scale = None
    processing = "log" if config.run.log_domain else "linear"
    if config.run.log_domain:
        stack, scale = log_compress_stack(stack, config.run.eps)
    domain = _Domain(processing, config.metrics.domain, scale, config.run.eps)

    input_metrics = evaluate(domain.to_metric(stack[0]), rois)
    out_dir = Path(config.run.output_dir) if config.run.output_dir else None

    jobs = [(alg, n) for n in config.run.subset_sizes for alg in config.run.algorithms]
    cells: List[CellReport] = []
    lock = threading.Lock()

    def job(spec: Tuple[str, int]) -> None:
        cell = _run_cell(spec[0], spec[1], stack, config, rois, domain, out_dir)
        with lock:
            cells.append(cell)

    workers = 1 if config.run.timing else config.run.workers
    logger.info(f"running {len(jobs)} cells on {workers} worker(s), metrics in the {config.metrics.domain} domain")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(job, jobs))

    position = {spec: i for i, spec in enumerate(jobs)}
    cells.sort(key=lambda c: position[(c.algorithm, c.n_frames)])
    failed = [f"{c.algorithm}/n={c.n_frames}: {c.error}" for c in cells if not c.ok]
    warnings.extend(failed)

    report = RunReport(
        cells=tuple(cells),
        input_metrics=input_metrics,
        domain=config.metrics.domain,
        registration=registration,
        output_dir=str(out_dir) if out_dir else None,
        warnings=tuple(warnings),
    )
    if out_dir is not None:
        write_report_csv(report, out_dir / "report.csv")
        logger.info(f"report written to {out_dir / 'report.csv'}")
    return report


def load_pipeline_config(path: Union[str, Path], profile: Optional[str] = None) -> PipelineConfig:
    """Read ``path`` (plus ``{name}.{profile}.ini`` overrides) into a validated PipelineConfig."""
    files = ConfigManagement.get_config_files(path, profile)
    return ConfigManagement.provide_config(ConfigManagement.load_ini(files), PipelineConfig)
