import importlib.metadata

from .config import ConfigManagement, Profile
from .context import cell_context, get_cell_label
from .exceptions import (
    ConfigError,
    DegenerateInputError,
    DespeckleException,
    DivergenceError,
    InvalidInputError,
    NoSignalError,
    RegistrationFailedError,
    SelectionAmbiguousError,
    UndefinedMetricError,
)
from .ica import (
    IcaConfig,
    amari_index,
    center,
    covariance,
    fastica,
    infomax,
    jade,
    joint_diagonalize,
    lagged_covariance,
    negentropy_contrast,
    offdiag_energy,
    quadricov_identity,
    quadricov_projected,
    run_ica,
    sobi,
    whiten,
)
from .imageio import read_pgm, read_stack_dir, write_pgm
from .logging import LogFileOptions, setup_loguru
from .metrics import MetricsReport, Roi, RoiSet, cnr, enl, evaluate, load_rois, roi_stats, snr
from .pipeline import (
    PipelineConfig,
    RunReport,
    average_baseline,
    build_data_matrix,
    load_pipeline_config,
    median_baseline,
    reconstruct_image,
    run_pipeline,
    select_signal_component,
)
from .registration import RegistrationConfig, estimate_rigid, estimate_translation, register_stack, warp_rigid
from .schemas import (
    CoreModel,
    DataMatrix,
    Image,
    ImageStack,
    JointDiagonalization,
    RigidTransform,
    UnmixingResult,
    WhiteningResult,
)
from .speckle import (
    LogScale,
    PhantomConfig,
    SpeckleConfig,
    exp_decompress,
    generate_speckle_stack,
    log_compress,
    log_compress_stack,
    make_phantom,
)
from .timing import Stopwatch

try:
    __version__ = importlib.metadata.version("despeckle-core")
except importlib.metadata.PackageNotFoundError:
    # Package is not installed (e.g., during development without 'pip install -e .')
    __version__ = "unknown"

__all__ = [
    "__version__",
    # schemas
    "CoreModel",
    "DataMatrix",
    "Image",
    "ImageStack",
    "JointDiagonalization",
    "RigidTransform",
    "UnmixingResult",
    "WhiteningResult",
    # ica
    "IcaConfig",
    "amari_index",
    "center",
    "covariance",
    "fastica",
    "infomax",
    "jade",
    "joint_diagonalize",
    "lagged_covariance",
    "negentropy_contrast",
    "offdiag_energy",
    "quadricov_identity",
    "quadricov_projected",
    "run_ica",
    "sobi",
    "whiten",
    # registration
    "RegistrationConfig",
    "estimate_rigid",
    "estimate_translation",
    "register_stack",
    "warp_rigid",
    # speckle
    "LogScale",
    "PhantomConfig",
    "SpeckleConfig",
    "exp_decompress",
    "generate_speckle_stack",
    "log_compress",
    "log_compress_stack",
    "make_phantom",
    # metrics
    "MetricsReport",
    "Roi",
    "RoiSet",
    "cnr",
    "enl",
    "evaluate",
    "load_rois",
    "roi_stats",
    "snr",
    # pipeline
    "PipelineConfig",
    "RunReport",
    "average_baseline",
    "build_data_matrix",
    "load_pipeline_config",
    "median_baseline",
    "reconstruct_image",
    "run_pipeline",
    "select_signal_component",
    # image io
    "read_pgm",
    "read_stack_dir",
    "write_pgm",
    # exceptions
    "DespeckleException",
    "ConfigError",
    "DegenerateInputError",
    "DivergenceError",
    "InvalidInputError",
    "NoSignalError",
    "RegistrationFailedError",
    "SelectionAmbiguousError",
    "UndefinedMetricError",
    # logging / context / timing
    "setup_loguru",
    "LogFileOptions",
    "cell_context",
    "get_cell_label",
    "Stopwatch",
    # config
    "ConfigManagement",
    "Profile",
]
