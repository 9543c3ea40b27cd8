"""Variance schedule and the deterministic DDIM reverse step.

The schedule holds the cumulative retention products alpha_bar_t for
t = 0..T with alpha_bar_0 = 1. The reverse step is the standard
deterministic DDIM update

    z_{t-1} = sqrt(abar_{t-1}/abar_t) * z_t
            + sqrt(abar_{t-1}) * (sqrt(1/abar_{t-1} - 1) - sqrt(1/abar_t - 1)) * eps

which at t = 1 reduces to the predicted clean latent. A compatibility
variant that drops the sqrt(abar_{t-1}) factor on the noise coefficient is
available behind the ``eq1_verbatim`` flag; it does not reduce to the clean
latent at t = 1 and exists only so both updates are testable side by side.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvariantViolation


@dataclass(frozen=True)
class VarianceSchedule:
    """Cumulative products alpha_bar_t, indexed t = 0..T."""

    alphas_cumprod: np.ndarray
    T: int

    def __post_init__(self):
        table = np.asarray(self.alphas_cumprod, dtype=np.float64)
        object.__setattr__(self, "alphas_cumprod", table)
        if table.ndim != 1 or len(table) != self.T + 1:
            raise InvariantViolation(
                f"schedule table must have length T+1 = {self.T + 1}, got {len(table)}"
            )
        if table[0] != 1.0:
            raise InvariantViolation("alpha_bar_0 must equal 1 exactly")
        if np.any(table <= 0.0) or np.any(table > 1.0):
            raise InvariantViolation("alpha_bar values must lie in (0, 1]")
        if np.any(np.diff(table) >= 0.0):
            raise InvariantViolation("alpha_bar must be strictly decreasing")

    def alpha_bar(self, t: int) -> float:
        if not 0 <= t <= self.T:
            raise IndexError(f"step {t} outside 0..{self.T}")
        return float(self.alphas_cumprod[t])


def build_schedule(T: int, beta_start: float, beta_end: float) -> VarianceSchedule:
    """Linear-beta schedule: alpha_bar_t = prod_{s<=t} (1 - beta_s).

    beta_s is linearly spaced over [beta_start, beta_end] across the T
    steps (a single step uses beta_start alone).
    """
    if T < 1:
        raise ConfigError("T", f"must be a positive integer, got {T}")
    if not 0.0 < beta_start < 1.0:
        raise ConfigError("beta_start", f"must lie in (0, 1), got {beta_start}")
    if not 0.0 < beta_end < 1.0:
        raise ConfigError("beta_end", f"must lie in (0, 1), got {beta_end}")
    if beta_start > beta_end:
        raise ConfigError("beta_start", "must not exceed beta_end")
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    table = np.empty(T + 1, dtype=np.float64)
    table[0] = 1.0
    table[1:] = np.cumprod(1.0 - betas)
    return VarianceSchedule(alphas_cumprod=table, T=T)


def _check_step(z_t: np.ndarray, eps: np.ndarray, t: int, sched: VarianceSchedule):
    if z_t.shape != eps.shape:
        raise InvariantViolation(
            f"latent shape {z_t.shape} does not match noise shape {eps.shape}"
        )
    if not 1 <= t <= sched.T:
        raise IndexError(f"step {t} outside 1..{sched.T}")


def ddim_step(
    z_t: np.ndarray,
    eps: np.ndarray,
    t: int,
    sched: VarianceSchedule,
    eq1_verbatim: bool = False,
) -> np.ndarray:
    """One deterministic reverse step z_t -> z_{t-1}. Pure."""
    z_t = np.asarray(z_t, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_step(z_t, eps, t, sched)
    abar_t = sched.alpha_bar(t)
    abar_prev = sched.alpha_bar(t - 1)
    signal = math.sqrt(abar_prev / abar_t)
    noise = math.sqrt(1.0 / abar_prev - 1.0) - math.sqrt(1.0 / abar_t - 1.0)
    if not eq1_verbatim:
        noise *= math.sqrt(abar_prev)
    return signal * z_t + noise * eps


def predicted_x0(
    z_t: np.ndarray, eps: np.ndarray, t: int, sched: VarianceSchedule
) -> np.ndarray:
    """Clean-latent estimate (z_t - sqrt(1-abar_t) * eps) / sqrt(abar_t)."""
    z_t = np.asarray(z_t, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_step(z_t, eps, t, sched)
    abar_t = sched.alpha_bar(t)
    return (z_t - math.sqrt(1.0 - abar_t) * eps) / math.sqrt(abar_t)
