"""Acceptance suite: one test per guaranteed behavior, checked against the
independent oracles with explicit tolerances and runtime bounds. Each test
records a pass/fail line rendered in the terminal summary."""

import math
import time

import numpy as np

import oracles
from acceptance_report import record
from cutdiffusion.denoise import CountingBackend, make_backend
from cutdiffusion.io import config_hash, save_latent
from cutdiffusion.pipeline import (
    RunConfig,
    run_cutdiffusion,
    run_direct,
    run_multidiffusion_baseline,
)
from cutdiffusion.rng import substream
from cutdiffusion.schedule import VarianceSchedule, ddim_step
from cutdiffusion.stats import duplicated_block_fraction, ks_critical_value, ks_normal
from cutdiffusion.tile import (
    pixel_gather,
    pixel_interaction,
    pixel_relocation,
    sample_patchset,
    shifted_window_tiles,
)


def iid_cfg(**overrides) -> RunConfig:
    base = dict(
        base_h=8, base_w=8, channels=1, target_h=16, target_w=16,
        steps=50, t_prime=25, seed=101,
        denoiser="gauss-iid", denoiser_params={"mean": 0.3, "variance": 0.25},
    )
    base.update(overrides)
    return RunConfig(**base)


def test_patch_count_reproduction():
    start = time.perf_counter()
    spec = shifted_window_tiles(384, 384, 128, 128, 64, 64)
    ps = sample_patchset(substream(0, "patchset"), 384, 384, 128, 128, 1)
    elapsed = time.perf_counter() - start
    tiles = len(spec.rects)
    ok = tiles == 25 and ps.count == 9 and elapsed < 1.0
    record(
        "patch-count-reproduction", ok,
        f"overlapping tiles {tiles} (want 25), non-overlapping patches "
        f"{ps.count} (want 9), {elapsed:.3f}s (bound 1s)",
    )
    assert tiles == 25
    assert ps.count == 9
    assert elapsed < 1.0


def test_full_boundary_reduces_to_overlap_baseline():
    start = time.perf_counter()
    cfg = iid_cfg(base_h=32, base_w=32, target_h=64, target_w=64, t_prime=50)
    cut, _ = run_cutdiffusion(cfg)
    multi, _ = run_multidiffusion_baseline(cfg)
    elapsed = time.perf_counter() - start
    identical = bool(np.array_equal(cut, multi))
    ok = identical and elapsed < 30.0
    record(
        "full-boundary-reduces-to-baseline", ok,
        f"T'=T canvases bit-identical: {identical}, {elapsed:.2f}s (bound 30s)",
    )
    assert identical, "cut run with T'=T must equal the overlap baseline bit-for-bit"
    assert elapsed < 30.0


def test_cost_accounting():
    cfg = iid_cfg()
    counting = CountingBackend(
        make_backend(cfg.denoiser, cfg.denoiser_params, cfg.base_shape, cfg.steps)
    )
    _, cut_report = run_cutdiffusion(cfg, backend=counting)
    cut_counted = counting.calls
    counting = CountingBackend(
        make_backend(cfg.denoiser, cfg.denoiser_params, cfg.base_shape, cfg.steps)
    )
    _, multi_report = run_multidiffusion_baseline(cfg, backend=counting)
    ok = (
        cut_report.total_calls == 325 == cut_counted
        and multi_report.total_calls == 450 == counting.calls
    )
    record(
        "cost-accounting", ok,
        f"cut {cut_report.total_calls} reported == {cut_counted} counted == 325; "
        f"baseline {multi_report.total_calls} == {counting.calls} == 450",
    )
    assert cut_report.total_calls == 325
    assert cut_counted == 325
    assert multi_report.total_calls == 450
    assert counting.calls == 450


def test_relocation_bijectivity():
    rng = oracles.philox_stream(61, "accept-bijection")
    failures = 0
    for i in range(1000):
        h_s = 1 + i % 3
        w_s = 1 + (i // 3) % 3
        c = 1 + i % 3
        ps = sample_patchset(rng, 3 * h_s, 3 * w_s, 3, 3, c)
        back = pixel_gather(pixel_relocation(ps), h_s, w_s)
        same = all(np.array_equal(a, b) for a, b in zip(back.patches, ps.patches))
        if not (same and back.count == ps.count):
            failures += 1
    ok = failures == 0
    record(
        "relocation-bijectivity", ok,
        f"{1000 - failures}/1000 random patch sets (scales 1-3 per side) "
        "recovered bit-exactly by gather after relocation",
    )
    assert failures == 0


def test_interaction_conservation():
    failures = 0
    for trial in range(1000):
        rng = oracles.philox_stream(700 + trial, "accept-conserve")
        h = 2 + trial % 3
        w = 2 + (trial // 5) % 3
        c = 1 + trial % 2
        count = 2 + trial % 4
        ps = sample_patchset(rng, h, w * count, h, w, c)
        out = pixel_interaction(ps, substream(trial, "interact", 7))
        before = np.sort(np.stack(ps.patches), axis=0)
        after = np.sort(np.stack(out.patches), axis=0)
        if not np.array_equal(before, after):
            failures += 1
    ok = failures == 0
    record(
        "interaction-conservation", ok,
        f"{1000 - failures}/1000 trials kept every per-coordinate, per-channel "
        "value multiset exactly",
    )
    assert failures == 0


def test_distribution_matches_scalar_recursion():
    start = time.perf_counter()
    mu, var0 = 0.3, 0.25
    cfg = iid_cfg(
        base_h=50, base_w=50, target_h=100, target_w=100,
        denoiser_params={"mean": mu, "variance": var0}, seed=31,
    )
    table = oracles.alpha_bar_table(cfg.steps, cfg.beta_start, cfg.beta_end)
    want_mean, want_var = oracles.terminal_moments(table, cfg.steps, 0, mu, var0)
    n = cfg.target_h * cfg.target_w * cfg.channels
    se = math.sqrt(want_var / n)

    measured = {}
    for label, runner in (
        ("cut", run_cutdiffusion),
        ("baseline", run_multidiffusion_baseline),
        ("direct", run_direct),
    ):
        canvas = runner(cfg)[0]
        assert canvas.size == n >= 10_000
        measured[label] = oracles.mean_var_loops(canvas.ravel())
    elapsed = time.perf_counter() - start

    problems = []
    for label, (mean, var) in measured.items():
        if not abs(mean - want_mean) <= 3.0 * se:
            problems.append(f"{label} mean {mean:.6f} off oracle {want_mean:.6f}")
        if not abs(var - want_var) <= 0.10 * want_var:
            problems.append(f"{label} var {var:.6f} off oracle {want_var:.6f}")
    labels = list(measured)
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            if not abs(measured[a][0] - measured[b][0]) <= 3.0 * se:
                problems.append(f"{a}/{b} means disagree")
            if not abs(measured[a][1] - measured[b][1]) <= 0.10 * want_var:
                problems.append(f"{a}/{b} variances disagree")
    ok = not problems and elapsed < 120.0
    record(
        "distribution-matches-scalar-recursion", ok,
        f"oracle ({want_mean:.5f}, {want_var:.5f}); "
        + ", ".join(f"{k} ({v[0]:.5f}, {v[1]:.5f})" for k, v in measured.items())
        + f"; bands mean ±3SE={3 * se:.5f}, var ±10%; n={n}; "
        f"{elapsed:.1f}s (bound 120s)"
        + ("" if not problems else "; " + "; ".join(problems)),
    )
    assert not problems, problems
    assert elapsed < 120.0


def test_copy_mode_disrupts_boundary_distribution():
    mu, var0 = 0.3, 0.25
    cfg = iid_cfg(
        base_h=32, base_w=32, target_h=128, target_w=128,
        denoiser_params={"mean": mu, "variance": var0}, seed=77,
    )
    table = oracles.alpha_bar_table(cfg.steps, cfg.beta_start, cfg.beta_end)
    b_mean, b_var = oracles.terminal_moments(table, cfg.steps, cfg.t_prime, mu, var0)
    sigma = math.sqrt(b_var)
    n = cfg.target_h * cfg.target_w
    crit = ks_critical_value(n)

    from dataclasses import replace

    _, _, copied = run_cutdiffusion(replace(cfg, copy_mode=True), return_boundary=True)
    _, _, normal = run_cutdiffusion(cfg, return_boundary=True)
    h_s, w_s = cfg.target_h // cfg.base_h, cfg.target_w // cfg.base_w
    dup_copy = duplicated_block_fraction(copied, h_s, w_s)
    dup_normal = duplicated_block_fraction(normal, h_s, w_s)
    ks_copy = ks_normal(copied, b_mean, sigma)
    ks_fresh = ks_normal(normal, b_mean, sigma)
    ok = dup_copy == 1.0 and dup_normal == 0.0 and ks_copy > crit > ks_fresh
    record(
        "copy-mode-boundary-disruption", ok,
        f"duplication copy {dup_copy} (want exactly 1.0) / fresh {dup_normal} "
        f"(want exactly 0.0); KS copy {ks_copy:.5f} > 1% critical {crit:.5f} "
        f"> fresh {ks_fresh:.5f} over n={n}",
    )
    assert dup_copy == 1.0
    assert dup_normal == 0.0
    assert ks_copy > crit
    assert ks_fresh < crit


def test_determinism_across_workers_and_runs(tmp_path):
    cfg = iid_cfg(seed=13)
    digest = config_hash(cfg)
    blobs = []
    for i, workers in enumerate((1, 4, 1)):
        canvas, _ = run_cutdiffusion(cfg, workers=workers)
        path = tmp_path / f"run{i}.bin"
        save_latent(path, canvas, seed=cfg.seed, config_digest=digest)
        blobs.append(path.read_bytes() + (tmp_path / f"run{i}.json").read_bytes())
    identical = all(blob == blobs[0] for blob in blobs[1:])
    record(
        "determinism", identical,
        "latent files bit-identical for worker counts 1 and 4 and for two "
        f"consecutive single-worker runs: {identical}",
    )
    assert identical


def test_reverse_step_golden_vectors():
    rng = oracles.philox_stream(55, "accept-ddim")
    worst = 0.0
    for _ in range(100):
        lo, hi = np.sort(rng.uniform(0.05, 0.999, size=2))
        z, eps = rng.standard_normal(2)
        sched = VarianceSchedule(
            alphas_cumprod=np.array([1.0, float(hi), float(lo)]), T=2
        )
        got = float(
            ddim_step(np.full((1, 1, 1), z), np.full((1, 1, 1), eps), 2, sched)[0, 0, 0]
        )
        want = oracles.ddim_scalar(float(hi), float(lo), float(z), float(eps))
        worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
    ok = worst <= 1e-12
    record(
        "reverse-step-golden-vectors", ok,
        f"worst relative error {worst:.3e} over 100 random coefficient tuples "
        "(tolerance 1e-12)",
    )
    assert worst <= 1e-12
