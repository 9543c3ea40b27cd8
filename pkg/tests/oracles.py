"""Independent oracle implementations used to compute and freeze golden values.

Everything here is deliberately written with plain Python loops, math.*
scalar arithmetic, or a different library routine than the engine uses, so
oracle values never share a code path with the functions they check.
"""

import hashlib
import math

import numpy as np
from scipy import stats


def philox_stream(seed, *tags):
    """Replay the documented substream derivation.

    Key = blake2b-16 of repr((seed, *tags)), read as two little-endian
    u64 words feeding a Philox counter-based generator.
    """
    msg = repr((int(seed),) + tuple(tags)).encode("utf-8")
    key = np.frombuffer(hashlib.blake2b(msg, digest_size=16).digest(), dtype="<u8")
    return np.random.Generator(np.random.Philox(key=key))


def alpha_bar_table(steps, beta_start, beta_end):
    """Cumulative retention products for a linear beta ramp, as a plain loop."""
    table = [1.0]
    prod = 1.0
    for s in range(steps):
        if steps == 1:
            beta = beta_start
        else:
            beta = beta_start + (beta_end - beta_start) * s / (steps - 1)
        prod *= 1.0 - beta
        table.append(prod)
    return table


def ddim_scalar(abar_prev, abar_t, z, eps):
    c = math.sqrt(abar_prev / abar_t)
    d = math.sqrt(abar_prev) * (
        math.sqrt(1.0 / abar_prev - 1.0) - math.sqrt(1.0 / abar_t - 1.0)
    )
    return c * z + d * eps


def ddim_scalar_verbatim(abar_prev, abar_t, z, eps):
    # Printed-form variant: no sqrt(abar_prev) factor on the noise term.
    c = math.sqrt(abar_prev / abar_t)
    d = math.sqrt(1.0 / abar_prev - 1.0) - math.sqrt(1.0 / abar_t - 1.0)
    return c * z + d * eps


def x0_scalar(abar_t, z, eps):
    return (z - math.sqrt(1.0 - abar_t) * eps) / math.sqrt(abar_t)


def iid_posterior_scalar(abar_t, mu, var0, z):
    """Posterior mean and noise estimate for x0 ~ N(mu, var0) per pixel."""
    denom = abar_t * var0 + 1.0 - abar_t
    post = (math.sqrt(abar_t) * var0 * z + (1.0 - abar_t) * mu) / denom
    eps = (z - math.sqrt(abar_t) * post) / math.sqrt(1.0 - abar_t)
    return post, eps


def iid_affine_coeffs(abar_t, mu, var0):
    """eps_hat = a*z + b for the scalar posterior denoiser at one step."""
    denom = abar_t * var0 + 1.0 - abar_t
    a = math.sqrt(1.0 - abar_t) / denom
    b = -math.sqrt(abar_t) * math.sqrt(1.0 - abar_t) * mu / denom
    return a, b


def zero_affine_coeffs(abar_t, mu, var0):
    return 0.0, 0.0


def step_affine(abar_prev, abar_t, a, b):
    """Compose the reverse step with an affine noise estimate: z' = A z + B."""
    c = math.sqrt(abar_prev / abar_t)
    d = math.sqrt(abar_prev) * (
        math.sqrt(1.0 / abar_prev - 1.0) - math.sqrt(1.0 / abar_t - 1.0)
    )
    return c + d * a, d * b


def terminal_moments(alpha_bar, t_from, t_to, mu, var0, coeffs=iid_affine_coeffs):
    """Scalar recursion for the per-pixel law of z_{t_to} given z_{t_from} ~ N(0,1).

    Each deterministic reverse step is an affine map z -> A z + B, so the
    Gaussian law propagates exactly: mean -> A mean + B, var -> A^2 var.
    """
    mean, var = 0.0, 1.0
    for t in range(t_from, t_to, -1):
        a, b = coeffs(alpha_bar[t], mu, var0)
        big_a, big_b = step_affine(alpha_bar[t - 1], alpha_bar[t], a, b)
        mean = big_a * mean + big_b
        var = big_a * big_a * var
    return mean, var


def relocate_reference(patches, h_s, w_s):
    """Loop transcription of the interleaving rule.

    Row/column residues pick the source patch (row-major over the
    h_s x w_s block), integer division picks the in-patch pixel.
    """
    h, w, c = patches[0].shape
    out = np.empty((h * h_s, w * w_s, c), dtype=patches[0].dtype)
    for row in range(h * h_s):
        for col in range(w * w_s):
            p = (row % h_s) * w_s + (col % w_s)
            out[row, col, :] = patches[p][row // h_s, col // w_s, :]
    return out


def coverage_counts(canvas_h, canvas_w, rects, patch_h, patch_w):
    """Brute-force per-cell count of how many tiles cover each cell."""
    counts = np.zeros((canvas_h, canvas_w), dtype=int)
    for top, left in rects:
        for i in range(patch_h):
            for j in range(patch_w):
                counts[top + i, left + j] += 1
    return counts


def interaction_replay(seed, t, patches):
    """Replay the documented interaction stream with Python-level sorting.

    Stream for step t draws uniforms of shape (h, w, L1); at each
    coordinate the ascending stable order of those keys is the permutation,
    and output patch i takes the channel vector of input patch order[i].
    """
    n = len(patches)
    h, w, _ = patches[0].shape
    rng = philox_stream(seed, "interact", t)
    keys = rng.random((h, w, n))
    out = [np.empty_like(p) for p in patches]
    for x in range(h):
        for y in range(w):
            order = sorted(range(n), key=lambda i: keys[x, y, i])
            for i in range(n):
                out[i][x, y, :] = patches[order[i]][x, y, :]
    return out


def ks_statistic_oracle(x, mu, sigma):
    return stats.kstest(np.asarray(x, dtype=float).ravel(), "norm", args=(mu, sigma)).statistic


def mean_var_loops(values):
    """Unbiased sample moments with compensated summation."""
    vals = [float(v) for v in np.asarray(values).ravel()]
    n = len(vals)
    mean = math.fsum(vals) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, var
