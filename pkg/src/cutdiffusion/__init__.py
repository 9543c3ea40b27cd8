"""Two-phase patch-diffusion extrapolation engine with analytic denoisers.

The package generates canvases larger than a denoiser's native patch size
by splitting the reverse diffusion into a structure phase on interleaved
non-overlapping patches and a detail phase on overlapping shifted windows.
Analytic Gaussian backends make every run exactly checkable; a remote
backend speaks the CDN1 wire protocol to out-of-process denoisers.
"""

from .denoise import (
    CountingBackend,
    DenoiseRequest,
    GaussianCorrelatedBackend,
    GaussianDataModel,
    GaussianIIDBackend,
    RemoteBackend,
    ZeroBackend,
    analytic_correlated_eps,
    analytic_iid_eps,
    exp_decay_covariance,
    make_backend,
    predict_noise,
    reverse_moments,
)
from .errors import (
    CapacityError,
    ConfigError,
    CutDiffusionError,
    InvariantViolation,
    ProtocolViolation,
    TransportError,
)
from .io import (
    config_from_dict,
    config_hash,
    config_to_dict,
    load_config,
    load_latent,
    save_config,
    save_image_ppm,
    save_latent,
)
from .pipeline import (
    AblationRecord,
    CostReport,
    RunConfig,
    run_ablation_sweep,
    run_cutdiffusion,
    run_direct,
    run_multidiffusion_baseline,
)
from .rng import substream
from .schedule import VarianceSchedule, build_schedule, ddim_step, predicted_x0
from .stats import (
    StatRow,
    duplicated_block_fraction,
    emit_cost_table,
    emit_stat_table,
    ks_critical_value,
    ks_normal,
    max_cross_patch_correlation,
    moments,
    stat_row,
)
from .tile import (
    PatchSet,
    TileSpec,
    extract_tiles,
    fuse_overlaps,
    pixel_gather,
    pixel_interaction,
    pixel_relocation,
    sample_patchset,
    shifted_window_tiles,
)
from .verify import run_checks

__version__ = "0.1.0"

__all__ = [
    "AblationRecord",
    "CapacityError",
    "ConfigError",
    "CostReport",
    "CountingBackend",
    "CutDiffusionError",
    "DenoiseRequest",
    "GaussianCorrelatedBackend",
    "GaussianDataModel",
    "GaussianIIDBackend",
    "InvariantViolation",
    "PatchSet",
    "ProtocolViolation",
    "RemoteBackend",
    "RunConfig",
    "StatRow",
    "TileSpec",
    "TransportError",
    "VarianceSchedule",
    "ZeroBackend",
    "analytic_correlated_eps",
    "analytic_iid_eps",
    "build_schedule",
    "config_from_dict",
    "config_hash",
    "config_to_dict",
    "ddim_step",
    "duplicated_block_fraction",
    "emit_cost_table",
    "emit_stat_table",
    "exp_decay_covariance",
    "extract_tiles",
    "fuse_overlaps",
    "ks_critical_value",
    "ks_normal",
    "load_config",
    "load_latent",
    "make_backend",
    "max_cross_patch_correlation",
    "moments",
    "pixel_gather",
    "pixel_interaction",
    "pixel_relocation",
    "predict_noise",
    "predicted_x0",
    "reverse_moments",
    "run_ablation_sweep",
    "run_checks",
    "run_cutdiffusion",
    "run_direct",
    "run_multidiffusion_baseline",
    "sample_patchset",
    "save_config",
    "save_image_ppm",
    "save_latent",
    "shifted_window_tiles",
    "stat_row",
    "substream",
]
