"""Two-phase run orchestration plus baselines and cost accounting.

Phase 1 ("comprehensive structure"): L1 non-overlapping patches are
denoised jointly from t = T down to T'+1, with same-coordinate pixels
shuffled across patches before each step so every patch sees every
region's content. Phase 2 ("specific detail"): the patches are interleaved
into the full canvas, and overlapping shifted-window tiles are denoised
from t = T' down to 1 with per-step overlap averaging.

Baselines: the MultiDiffusion-style run denoises the full canvas with
shifted-window tiles for all T steps (the T' = T special case), and the
direct run denoises the whole canvas as one patch.

All three pipelines start from the same canonical canvas: the patch-major
draws of stream (seed, "patchset") interleaved by pixel relocation. That
makes the T' = T reduction a bit-identity rather than a statistical claim.
"""

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .denoise import DenoiseRequest, make_backend, predict_noise
from .errors import CapacityError, ConfigError, InvariantViolation
from .rng import substream
from .schedule import build_schedule, ddim_step
from .tile import (
    PatchSet,
    extract_tiles,
    fuse_overlaps,
    pixel_interaction,
    pixel_relocation,
    sample_patchset,
    shifted_window_tiles,
)


@dataclass(frozen=True)
class RunConfig:
    """Everything one run depends on. Hash of this is the reproduction key.

    Worker count is deliberately not part of the config: results are
    bit-identical for any worker count, so it is a runtime knob.
    """

    base_h: int
    base_w: int
    channels: int
    target_h: int
    target_w: int
    steps: int = 50
    t_prime: int = 25
    stride_h: int = 0  # 0 means the default base_h // 2
    stride_w: int = 0
    seed: int = 0
    denoiser: str = "gauss-iid"
    denoiser_params: dict = field(default_factory=dict)
    condition: str = ""
    no_interaction: bool = False
    copy_mode: bool = False
    eq1_verbatim: bool = False
    interaction_interval: int = 1
    beta_start: float = 0.004
    beta_end: float = 0.35

    def __post_init__(self):
        for name in ("base_h", "base_w", "channels", "target_h", "target_w", "steps"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(name, f"must be a positive integer, got {value!r}")
        if not 1 <= self.t_prime <= self.steps:
            raise ConfigError(
                "t_prime", f"must lie in 1..steps={self.steps}, got {self.t_prime}"
            )
        if self.interaction_interval < 1:
            raise ConfigError(
                "interaction_interval", f"must be >= 1, got {self.interaction_interval}"
            )
        if self.copy_mode and self.no_interaction:
            raise ConfigError(
                "copy_mode", "copy_mode already disables interaction; pick one flag"
            )
        if self.target_h % self.base_h != 0:
            raise ConfigError(
                "target_h", f"{self.target_h} is not a multiple of base_h {self.base_h}"
            )
        if self.target_w % self.base_w != 0:
            raise ConfigError(
                "target_w", f"{self.target_w} is not a multiple of base_w {self.base_w}"
            )
        # materialize stride defaults so the config hash pins them
        if self.stride_h == 0:
            object.__setattr__(self, "stride_h", max(self.base_h // 2, 1))
        if self.stride_w == 0:
            object.__setattr__(self, "stride_w", max(self.base_w // 2, 1))
        # fail now, not mid-run: the window grid must tile the canvas
        self.tile_spec()

    def tile_spec(self):
        return shifted_window_tiles(
            self.target_h, self.target_w, self.base_h, self.base_w,
            self.stride_h, self.stride_w,
        )

    @property
    def scale_patches(self) -> int:
        """L1: non-overlapping patch count at the target scale."""
        return (self.target_h * self.target_w) // (self.base_h * self.base_w)

    @property
    def base_shape(self) -> tuple:
        return (self.base_h, self.base_w, self.channels)

    @property
    def canvas_shape(self) -> tuple:
        return (self.target_h, self.target_w, self.channels)


@dataclass(frozen=True)
class CostReport:
    """Denoiser-call counts and the peak-resident-latent memory proxy."""

    label: str
    phase1_patches: int
    phase2_patches: int
    phase1_calls: int
    phase2_calls: int
    total_calls: int
    peak_resident_latents: int

    def __post_init__(self):
        counts = (
            self.phase1_patches, self.phase2_patches, self.phase1_calls,
            self.phase2_calls, self.total_calls, self.peak_resident_latents,
        )
        if any(int(v) != v or v < 0 for v in counts):
            raise InvariantViolation(f"counts must be nonnegative integers: {counts}")
        if self.total_calls != self.phase1_calls + self.phase2_calls:
            raise InvariantViolation(
                f"total {self.total_calls} != {self.phase1_calls} + {self.phase2_calls}"
            )


class _Runner:
    """Shared machinery: backend resolution, batching, call counting."""

    def __init__(self, cfg: RunConfig, backend, workers: int, backend_shape: tuple):
        if workers < 1:
            raise ConfigError("workers", f"must be >= 1, got {workers}")
        self.cfg = cfg
        self.sched = build_schedule(cfg.steps, cfg.beta_start, cfg.beta_end)
        self.backend = backend if backend is not None else make_backend(
            cfg.denoiser, cfg.denoiser_params, backend_shape, cfg.steps
        )
        self.workers = workers
        self.calls = 0
        self._pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    def predict_batch(self, latents, t):
        """One eps request per latent; results in input order."""
        reqs = [
            DenoiseRequest(
                latent=lat, t=t, condition=self.cfg.condition,
                request_id=self.calls + i,
            )
            for i, lat in enumerate(latents)
        ]
        self.calls += len(reqs)

        def run_one(req):
            return predict_noise(self.backend, req, self.sched)

        if self._pool is None:
            return [run_one(r) for r in reqs]
        return list(self._pool.map(run_one, reqs))

    def step_batch(self, latents, t):
        eps = self.predict_batch(latents, t)
        return [
            ddim_step(lat, e, t, self.sched, eq1_verbatim=self.cfg.eq1_verbatim)
            for lat, e in zip(latents, eps)
        ]


def _require_shape(backend, shape: tuple):
    """Reject fixed-shape backends that cannot serve this latent size."""
    served = getattr(backend, "shape", None)
    if served is not None and tuple(served) != tuple(shape):
        raise CapacityError(
            f"backend serves patch shape {tuple(served)}, run needs {tuple(shape)}"
        )
    model = getattr(backend, "model", None)
    if model is not None and not model.is_scalar:
        need = int(np.prod(shape))
        if model.variance.shape[0] != need:
            raise CapacityError(
                f"backend covariance is {model.variance.shape[0]}-dimensional, "
                f"run needs {need}"
            )


def _audit_calls(runner: _Runner, report: CostReport):
    if runner.calls != report.total_calls:
        raise InvariantViolation(
            f"counted {runner.calls} backend calls, report claims {report.total_calls}"
        )


def _canonical_canvas(cfg: RunConfig) -> np.ndarray:
    """Initial full-canvas noise: relocated patch-major draws."""
    ps = sample_patchset(
        substream(cfg.seed, "patchset"),
        cfg.target_h, cfg.target_w, cfg.base_h, cfg.base_w, cfg.channels,
    )
    return pixel_relocation(ps)


def run_cutdiffusion(cfg: RunConfig, backend=None, workers: int = 1,
                     return_boundary: bool = False):
    """Two-phase run. Returns (final canvas, CostReport).

    With ``return_boundary=True`` the relocated phase-boundary canvas
    z_{T'} is returned as a third element.
    """
    runner = _Runner(cfg, backend, workers, cfg.base_shape)
    try:
        _require_shape(runner.backend, cfg.base_shape)
        rng_patch = substream(cfg.seed, "patchset")
        if cfg.copy_mode:
            seed_patch = rng_patch.standard_normal(cfg.base_shape)
            patches = [seed_patch.copy() for _ in range(cfg.scale_patches)]
            h_s = cfg.target_h // cfg.base_h
            w_s = cfg.target_w // cfg.base_w
        else:
            ps = sample_patchset(
                rng_patch, cfg.target_h, cfg.target_w,
                cfg.base_h, cfg.base_w, cfg.channels,
            )
            patches = list(ps.patches)
            h_s, w_s = ps.h_s, ps.w_s

        interact = not (cfg.no_interaction or cfg.copy_mode) and len(patches) > 1
        for t in range(cfg.steps, cfg.t_prime, -1):
            if interact and (cfg.steps - t) % cfg.interaction_interval == 0:
                ps = PatchSet(patches=tuple(patches), h_s=h_s, w_s=w_s)
                ps = pixel_interaction(ps, substream(cfg.seed, "interact", t))
                patches = list(ps.patches)
            patches = runner.step_batch(patches, t)

        boundary = pixel_relocation(
            PatchSet(patches=tuple(patches), h_s=h_s, w_s=w_s)
        )

        spec = cfg.tile_spec()
        canvas = boundary
        for t in range(cfg.t_prime, 0, -1):
            tiles = extract_tiles(canvas, spec)
            canvas = fuse_overlaps(runner.step_batch(tiles, t), spec)

        l1, l2 = cfg.scale_patches, len(spec.rects)
        report = CostReport(
            label="cut",
            phase1_patches=l1,
            phase2_patches=l2,
            phase1_calls=l1 * (cfg.steps - cfg.t_prime),
            phase2_calls=l2 * cfg.t_prime,
            total_calls=l1 * (cfg.steps - cfg.t_prime) + l2 * cfg.t_prime,
            peak_resident_latents=1,
        )
        _audit_calls(runner, report)
        if return_boundary:
            return canvas, report, boundary
        return canvas, report
    finally:
        runner.close()


def run_multidiffusion_baseline(cfg: RunConfig, backend=None, workers: int = 1):
    """Shifted-window denoising of the full canvas for all T steps."""
    runner = _Runner(cfg, backend, workers, cfg.base_shape)
    try:
        _require_shape(runner.backend, cfg.base_shape)
        spec = cfg.tile_spec()
        canvas = _canonical_canvas(cfg)
        for t in range(cfg.steps, 0, -1):
            tiles = extract_tiles(canvas, spec)
            canvas = fuse_overlaps(runner.step_batch(tiles, t), spec)
        l2 = len(spec.rects)
        report = CostReport(
            label="multi",
            phase1_patches=0,
            phase2_patches=l2,
            phase1_calls=0,
            phase2_calls=l2 * cfg.steps,
            total_calls=l2 * cfg.steps,
            peak_resident_latents=1,
        )
        _audit_calls(runner, report)
        return canvas, report
    finally:
        runner.close()


def run_direct(cfg: RunConfig, backend=None, workers: int = 1):
    """Single-patch denoising of the whole canvas; the memory-proxy worst case."""
    runner = _Runner(cfg, backend, workers, cfg.canvas_shape)
    try:
        _require_shape(runner.backend, cfg.canvas_shape)
        canvas = _canonical_canvas(cfg)
        for t in range(cfg.steps, 0, -1):
            canvas = runner.step_batch([canvas], t)[0]
        report = CostReport(
            label="direct",
            phase1_patches=0,
            phase2_patches=1,
            phase1_calls=0,
            phase2_calls=cfg.steps,
            total_calls=cfg.steps,
            peak_resident_latents=cfg.scale_patches,
        )
        _audit_calls(runner, report)
        return canvas, report
    finally:
        runner.close()


@dataclass(frozen=True)
class AblationRecord:
    """One sweep entry: the run outputs plus boundary and final stat rows."""

    t_prime: int
    latent: np.ndarray
    boundary: np.ndarray
    report: CostReport
    row_boundary: object
    row_final: object


def run_ablation_sweep(cfg: RunConfig, backend=None, t_prime_values=(1, 25, 50),
                       workers: int = 1):
    """One cut run per T' with a shared seed; stats at boundary and final."""
    from .stats import stat_row

    records = []
    for tp in t_prime_values:
        run_cfg = dataclasses.replace(cfg, t_prime=int(tp))
        latent, report, boundary = run_cutdiffusion(
            run_cfg, backend, workers=workers, return_boundary=True
        )
        records.append(
            AblationRecord(
                t_prime=int(tp),
                latent=latent,
                boundary=boundary,
                report=report,
                row_boundary=stat_row(f"cut-tp{tp}-boundary", run_cfg, boundary,
                                      at_step=run_cfg.t_prime),
                row_final=stat_row(f"cut-tp{tp}-final", run_cfg, latent, at_step=0),
            )
        )
    return records
