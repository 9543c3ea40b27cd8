"""Self-contained release checks.

Each check exercises one guaranteed property of the engine end to end and
reports pass/fail with a one-line detail. Reference values are computed
inline with plain scalar arithmetic so a check never trusts the code path
it is checking. ``run_checks`` drives the suite; the CLI's ``verify``
subcommand renders the results and maps failures to exit status 1.
"""

import math
import tempfile
import time
from dataclasses import dataclass, replace

import numpy as np

from .denoise import CountingBackend, make_backend
from .io import config_hash, save_latent
from .pipeline import (
    RunConfig,
    run_cutdiffusion,
    run_direct,
    run_multidiffusion_baseline,
)
from .rng import substream
from .schedule import VarianceSchedule, build_schedule, ddim_step
from .stats import duplicated_block_fraction, ks_critical_value, ks_normal, moments
from .tile import pixel_gather, pixel_interaction, pixel_relocation, sample_patchset, shifted_window_tiles


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _ddim_reference(abar_prev: float, abar_t: float, z: float, eps: float) -> float:
    scale = math.sqrt(abar_prev / abar_t)
    shift = math.sqrt(abar_prev) * (
        math.sqrt(1.0 / abar_prev - 1.0) - math.sqrt(1.0 / abar_t - 1.0)
    )
    return scale * z + shift * eps


def _recursion_moments(table, t_from: int, t_to: int, mu: float, var0: float):
    """Per-pixel moments of the reverse chain from z_T ~ N(0, 1)."""
    mean, var = 0.0, 1.0
    for t in range(t_from, t_to, -1):
        abar_t, abar_prev = table[t], table[t - 1]
        d = abar_t * var0 + (1.0 - abar_t)
        a = math.sqrt(1.0 - abar_t) / d
        b = -math.sqrt(abar_t) * math.sqrt(1.0 - abar_t) * mu / d
        scale = math.sqrt(abar_prev / abar_t)
        shift = math.sqrt(abar_prev) * (
            math.sqrt(1.0 / abar_prev - 1.0) - math.sqrt(1.0 / abar_t - 1.0)
        )
        total = scale + shift * a
        mean = total * mean + shift * b
        var = total * total * var
    return mean, var


def _iid_cfg(**overrides) -> RunConfig:
    base = dict(
        base_h=8, base_w=8, channels=1, target_h=16, target_w=16,
        steps=50, t_prime=25, seed=101,
        denoiser="gauss-iid", denoiser_params={"mean": 0.3, "variance": 0.25},
    )
    base.update(overrides)
    return RunConfig(**base)


def check_patch_counts():
    spec = shifted_window_tiles(384, 384, 128, 128, 64, 64)
    ps = sample_patchset(substream(0, "patchset"), 384, 384, 128, 128, 1)
    tiles = len(spec.rects)
    passed = tiles == 25 and ps.count == 9
    return passed, f"shifted windows {tiles} (want 25), patches {ps.count} (want 9)"


def check_multidiffusion_special_case():
    cfg = _iid_cfg(base_h=32, base_w=32, target_h=64, target_w=64, t_prime=50)
    cut, _ = run_cutdiffusion(cfg)
    multi, _ = run_multidiffusion_baseline(cfg)
    passed = bool(np.array_equal(cut, multi))
    diff = 0.0 if passed else float(np.max(np.abs(cut - multi)))
    return passed, f"T'=T canvas vs baseline max |diff| = {diff} (want bit-identical)"


def check_cost_accounting():
    cfg = _iid_cfg()
    counting = CountingBackend(make_backend(cfg.denoiser, cfg.denoiser_params,
                                            cfg.base_shape, cfg.steps))
    _, cut_report = run_cutdiffusion(cfg, backend=counting)
    cut_counted = counting.calls
    counting = CountingBackend(make_backend(cfg.denoiser, cfg.denoiser_params,
                                            cfg.base_shape, cfg.steps))
    _, multi_report = run_multidiffusion_baseline(cfg, backend=counting)
    passed = (
        cut_report.total_calls == 325
        and cut_counted == 325
        and multi_report.total_calls == 450
        and counting.calls == 450
    )
    return passed, (
        f"cut {cut_report.total_calls} reported / {cut_counted} counted (want 325), "
        f"baseline {multi_report.total_calls} / {counting.calls} (want 450)"
    )


def check_relocation_bijectivity():
    rng = substream(7, "verify-bijection")
    failures = 0
    trials = 0
    for i in range(1000):
        h_s = 1 + i % 3
        w_s = 1 + (i // 3) % 3
        c = 1 + i % 2
        ps = sample_patchset(rng, 4 * h_s, 4 * w_s, 4, 4, c)
        back = pixel_gather(pixel_relocation(ps), h_s, w_s)
        trials += 1
        same = len(back.patches) == len(ps.patches) and all(
            np.array_equal(a, b) for a, b in zip(back.patches, ps.patches)
        )
        failures += 0 if same else 1
    return failures == 0, f"{trials - failures}/{trials} patch sets round-tripped bit-exactly"


def check_interaction_conservation():
    failures = 0
    for trial in range(1000):
        rng = substream(400 + trial, "verify-conserve")
        h = 2 + trial % 3
        w = 2 + (trial // 3) % 3
        c = 1 + trial % 2
        count = 2 + trial % 3
        ps = sample_patchset(rng, h, w * count, h, w, c)
        out = pixel_interaction(ps, substream(trial, "interact", 5))
        before = np.sort(np.stack(ps.patches), axis=0)
        after = np.sort(np.stack(out.patches), axis=0)
        if not np.array_equal(before, after):
            failures += 1
    return failures == 0, f"{1000 - failures}/1000 trials preserved every per-coordinate multiset"


def check_oracle_distribution_equivalence():
    mu, var0 = 0.3, 0.25
    cfg = _iid_cfg(
        base_h=50, base_w=50, target_h=100, target_w=100,
        denoiser_params={"mean": mu, "variance": var0}, seed=31,
    )
    sched = build_schedule(cfg.steps, cfg.beta_start, cfg.beta_end)
    table = [float(sched.alpha_bar(t)) for t in range(cfg.steps + 1)]
    want_mean, want_var = _recursion_moments(table, cfg.steps, 0, mu, var0)
    n = cfg.target_h * cfg.target_w * cfg.channels
    se = math.sqrt(want_var / n)

    canvases = {
        "cut": run_cutdiffusion(cfg)[0],
        "baseline": run_multidiffusion_baseline(cfg)[0],
        "direct": run_direct(cfg)[0],
    }
    stats = {label: moments(canvas) for label, canvas in canvases.items()}
    problems = []
    for label, (mean, var) in stats.items():
        if abs(mean - want_mean) > 3.0 * se:
            problems.append(f"{label} mean {mean:.5f} vs {want_mean:.5f}")
        if abs(var - want_var) > 0.10 * want_var:
            problems.append(f"{label} var {var:.5f} vs {want_var:.5f}")
    labels = list(stats)
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            if abs(stats[a][0] - stats[b][0]) > 3.0 * se:
                problems.append(f"{a}/{b} means differ")
            if abs(stats[a][1] - stats[b][1]) > 0.10 * want_var:
                problems.append(f"{a}/{b} variances differ")
    detail = (
        f"oracle ({want_mean:.5f}, {want_var:.5f}); " +
        ", ".join(f"{k} ({v[0]:.5f}, {v[1]:.5f})" for k, v in stats.items())
    )
    if problems:
        detail += "; OUT OF BAND: " + "; ".join(problems)
    return not problems, detail


def check_copy_mode_failure():
    mu, var0 = 0.3, 0.25
    cfg = _iid_cfg(
        base_h=32, base_w=32, target_h=128, target_w=128,
        denoiser_params={"mean": mu, "variance": var0}, seed=77,
    )
    sched = build_schedule(cfg.steps, cfg.beta_start, cfg.beta_end)
    table = [float(sched.alpha_bar(t)) for t in range(cfg.steps + 1)]
    b_mean, b_var = _recursion_moments(table, cfg.steps, cfg.t_prime, mu, var0)
    sigma = math.sqrt(b_var)
    crit = ks_critical_value(cfg.target_h * cfg.target_w)

    _, _, copied = run_cutdiffusion(replace(cfg, copy_mode=True), return_boundary=True)
    _, _, normal = run_cutdiffusion(cfg, return_boundary=True)
    h_s = cfg.target_h // cfg.base_h
    w_s = cfg.target_w // cfg.base_w
    dup_copy = duplicated_block_fraction(copied, h_s, w_s)
    dup_normal = duplicated_block_fraction(normal, h_s, w_s)
    ks_copy = ks_normal(copied, b_mean, sigma)
    ks_fresh = ks_normal(normal, b_mean, sigma)
    passed = (
        dup_copy == 1.0 and dup_normal == 0.0
        and ks_copy > crit and ks_fresh < crit
    )
    return passed, (
        f"dup copy {dup_copy} (want 1.0) / normal {dup_normal} (want 0.0); "
        f"KS copy {ks_copy:.5f} vs crit {crit:.5f} vs normal {ks_fresh:.5f}"
    )


def check_determinism():
    cfg = _iid_cfg(seed=13)
    digest = config_hash(cfg)
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for i, workers in enumerate((1, 4, 1)):
            canvas, _ = run_cutdiffusion(cfg, workers=workers)
            path = f"{tmp}/run{i}.bin"
            save_latent(path, canvas, seed=cfg.seed, config_digest=digest)
            with open(path, "rb") as fh:
                payload = fh.read()
            with open(f"{tmp}/run{i}.json", "rb") as fh:
                blobs.append((payload, fh.read()))
    passed = all(blob == blobs[0] for blob in blobs[1:])
    return passed, (
        "latent files identical across workers 1/4 and a repeat run"
        if passed else "latent files differ between runs"
    )


def check_ddim_golden_vectors():
    rng = substream(97, "verify-ddim")
    worst = 0.0
    for _ in range(100):
        lo, hi = np.sort(rng.uniform(0.05, 0.999, size=2))
        z, eps = rng.standard_normal(2)
        sched = VarianceSchedule(
            alphas_cumprod=np.array([1.0, float(hi), float(lo)]), T=2
        )
        got = ddim_step(np.full((1, 1, 1), z), np.full((1, 1, 1), eps), 2, sched)
        want = _ddim_reference(float(hi), float(lo), float(z), float(eps))
        rel = abs(float(got[0, 0, 0]) - want) / max(abs(want), 1e-300)
        worst = max(worst, rel)
    return worst < 1e-12, f"worst relative error {worst:.3e} over 100 tuples (want < 1e-12)"


CHECKS = (
    ("patch-counts", check_patch_counts, True),
    ("multidiffusion-special-case", check_multidiffusion_special_case, True),
    ("cost-accounting", check_cost_accounting, True),
    ("relocation-bijectivity", check_relocation_bijectivity, True),
    ("interaction-conservation", check_interaction_conservation, True),
    ("oracle-distribution-equivalence", check_oracle_distribution_equivalence, False),
    ("copy-mode-failure", check_copy_mode_failure, False),
    ("determinism", check_determinism, True),
    ("ddim-golden-vectors", check_ddim_golden_vectors, True),
)


def run_checks(quick: bool = False):
    """Run the release checks; quick mode skips the two slowest."""
    results = []
    for name, func, in_quick in CHECKS:
        if quick and not in_quick:
            continue
        start = time.perf_counter()
        passed, detail = func()
        results.append(CheckResult(name, passed, detail, time.perf_counter() - start))
    return results


def render(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [
        f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  "
        f"[{r.seconds:6.2f}s]  {r.detail}"
        for r in results
    ]
    good = sum(r.passed for r in results)
    lines.append(f"{good}/{len(results)} checks passed")
    return "\n".join(lines)
