"""Thick linear structure detection with linear anchored Gaussian mixtures."""

__version__ = "0.1.0"

from .model import (
    ComponentParams,
    EmptyImageError,
    ImageDomain,
    LagmixError,
    LineParams,
    lagd_pdf,
    lagd_unnormalized,
    domain_volume,
    line_difference,
    sigma_from_width,
    width_from_sigma,
)
from .em import (
    DetectionReport,
    MixtureState,
    NormalizedImage,
    e_step,
    init_params,
    normalize_image,
    q_function,
    run_em,
)
from .bands import BandMask, EmptyBandError, apply_mask, build_band_mask, run_em_bs
from .hessian import (
    HessianConfig,
    HessianError,
    StructureSeed,
    estimate_structures,
    init_from_hessian,
    ridge_measures,
)
from .synth import BarSpec, CorruptionSpec, SceneError, corrupt, render_reference, render_scene
from .metrics import ErrorReport, compute_errors, evaluate, match_components
from .bench import BenchError, run_suite, suite_csv
from .imgio import ImageIOError, read_image, render_overlay, write_image, write_overlay

__all__ = [
    "__version__",
    "ComponentParams",
    "EmptyImageError",
    "ImageDomain",
    "LagmixError",
    "LineParams",
    "lagd_pdf",
    "lagd_unnormalized",
    "domain_volume",
    "line_difference",
    "sigma_from_width",
    "width_from_sigma",
    "DetectionReport",
    "MixtureState",
    "NormalizedImage",
    "e_step",
    "init_params",
    "normalize_image",
    "q_function",
    "run_em",
    "BandMask",
    "EmptyBandError",
    "apply_mask",
    "build_band_mask",
    "run_em_bs",
    "HessianConfig",
    "HessianError",
    "StructureSeed",
    "estimate_structures",
    "init_from_hessian",
    "ridge_measures",
    "BarSpec",
    "CorruptionSpec",
    "SceneError",
    "corrupt",
    "render_reference",
    "render_scene",
    "ErrorReport",
    "compute_errors",
    "evaluate",
    "match_components",
    "BenchError",
    "run_suite",
    "suite_csv",
    "ImageIOError",
    "read_image",
    "render_overlay",
    "write_image",
    "write_overlay",
]
