"""Statistical checks and report tables.

Quantifies what the ablations claim qualitatively: whether a canvas still
looks like the expected Gaussian (KS distance), whether copy-mode
duplication is present (block-identity fraction), and how strongly patch
contents are coupled (max cross-patch correlation). Also renders cost and
stat reports as fixed-column CSV.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.special

from .denoise import GaussianDataModel, reverse_moments
from .errors import ConfigError, InvariantViolation
from .pipeline import RunConfig
from .schedule import build_schedule
from .tile import PatchSet, pixel_gather

COST_COLUMNS = (
    "label", "phase1_patches", "phase2_patches", "phase1_calls",
    "phase2_calls", "total_calls", "peak_resident_latents",
)
STAT_COLUMNS = (
    "label", "count", "mean", "variance", "ks_normal",
    "duplicated_block_fraction", "max_cross_patch_correlation",
)


@dataclass(frozen=True)
class StatRow:
    """One labeled set of distribution measurements."""

    label: str
    count: int
    mean: float
    variance: float
    ks: float
    dup_fraction: float
    max_cross_corr: float

    def __post_init__(self):
        if self.count <= 0:
            raise InvariantViolation("sample count must be positive")
        if not 0.0 <= self.ks <= 1.0:
            raise InvariantViolation(f"KS statistic {self.ks} outside [0, 1]")
        if not 0.0 <= self.dup_fraction <= 1.0:
            raise InvariantViolation(f"duplication fraction {self.dup_fraction}")


def moments(x: np.ndarray):
    """Sample mean and unbiased variance over all entries.

    Sums are exact (compensated), so the result is bit-identical under any
    permutation of the input.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise InvariantViolation("moments of an empty tensor")
    if x.size == 1:
        return float(x[0]), 0.0
    n = x.size
    mean = math.fsum(x) / n
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return mean, var


def ks_normal(x: np.ndarray, mu: float, sigma: float) -> float:
    """Sup distance between the empirical CDF and N(mu, sigma^2)."""
    if not sigma > 0.0:
        raise ConfigError("sigma", f"must be positive, got {sigma}")
    values = np.sort(np.asarray(x, dtype=np.float64).ravel())
    if values.size == 0:
        raise InvariantViolation("KS of an empty tensor")
    n = values.size
    cdf = scipy.special.ndtr((values - mu) / sigma)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def ks_critical_value(n: int, level: str = "1%") -> float:
    """Large-sample critical value; only the 1% level is used here."""
    if level != "1%":
        raise ConfigError("level", f"only the 1% level is tabulated, got {level}")
    return 1.63 / math.sqrt(n)


def duplicated_block_fraction(canvas: np.ndarray, h_s: int, w_s: int) -> float:
    """Fraction of h_s x w_s blocks whose entries are identical per channel.

    1x1 blocks are vacuously constant, so the fraction is only informative
    for scale factors above one.
    """
    H, W, c = canvas.shape
    if H % h_s != 0:
        raise ConfigError("h_s", f"{h_s} does not divide canvas height {H}")
    if W % w_s != 0:
        raise ConfigError("w_s", f"{w_s} does not divide canvas width {W}")
    blocks = canvas.reshape(H // h_s, h_s, W // w_s, w_s, c)
    ref = blocks[:, :1, :, :1, :]
    constant = (blocks == ref).all(axis=(1, 3)).all(axis=2)
    return float(constant.mean())


def max_cross_patch_correlation(ps: PatchSet) -> float:
    """Largest pairwise Pearson correlation between flattened patches.

    Pairs involving a zero-variance patch contribute 0.
    """
    if ps.count < 2:
        return 0.0
    flat = np.stack([p.ravel() for p in ps.patches])
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(flat)
    corr = np.nan_to_num(corr, nan=0.0)
    off = corr[~np.eye(ps.count, dtype=bool)]
    return float(off.max())


def stat_row(label: str, cfg: RunConfig, canvas: np.ndarray, at_step: int) -> StatRow:
    """Measure a canvas produced by a run of ``cfg`` at reverse step ``at_step``.

    The KS reference normal comes from the engine's moment recursion when
    the backend is pixel-separable (zero or scalar-mean gauss-iid);
    otherwise the canvas's own moments serve as a self-referenced
    normality probe.
    """
    mean, variance = moments(canvas)
    mu_ref, var_ref = mean, variance
    if cfg.denoiser in ("zero", "gauss-iid"):
        params = dict(cfg.denoiser_params or {})
        model = None
        if cfg.denoiser == "gauss-iid":
            model = GaussianDataModel(
                mean=params.get("mean", 0.0), variance=params.get("variance", 1.0)
            )
        if model is None or np.ndim(model.mean) == 0:
            sched = build_schedule(cfg.steps, cfg.beta_start, cfg.beta_end)
            mu_ref, var_ref = reverse_moments(
                sched, cfg.steps, at_step, model, eq1_verbatim=cfg.eq1_verbatim
            )
    h_s = cfg.target_h // cfg.base_h
    w_s = cfg.target_w // cfg.base_w
    return StatRow(
        label=label,
        count=int(canvas.size),
        mean=mean,
        variance=variance,
        ks=ks_normal(canvas, mu_ref, math.sqrt(var_ref)),
        dup_fraction=duplicated_block_fraction(canvas, h_s, w_s),
        max_cross_corr=max_cross_patch_correlation(pixel_gather(canvas, h_s, w_s)),
    )


def _render_csv(columns, rows) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row)
    return out.getvalue()


def emit_cost_table(reports) -> str:
    """CSV with one row per CostReport, columns fixed as COST_COLUMNS."""
    return _render_csv(
        COST_COLUMNS,
        (
            (
                r.label, r.phase1_patches, r.phase2_patches, r.phase1_calls,
                r.phase2_calls, r.total_calls, r.peak_resident_latents,
            )
            for r in reports
        ),
    )


def emit_stat_table(rows) -> str:
    """CSV with one row per StatRow, columns fixed as STAT_COLUMNS."""
    return _render_csv(
        STAT_COLUMNS,
        (
            (
                r.label, r.count, f"{r.mean:.17g}", f"{r.variance:.17g}",
                f"{r.ks:.17g}", f"{r.dup_fraction:.17g}", f"{r.max_cross_corr:.17g}",
            )
            for r in rows
        ),
    )
