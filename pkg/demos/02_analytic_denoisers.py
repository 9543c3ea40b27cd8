"""Closed-form Gaussian denoisers
=================================

The engine's test backends predict noise exactly instead of running a
neural network. This script shows the i.i.d. posterior shrinkage, the
correlated backend's structure preference, and the scalar moment
recursion that predicts a whole run's output distribution.
"""

import numpy as np

from cutdiffusion import (
    DenoiseRequest,
    GaussianDataModel,
    GaussianIIDBackend,
    analytic_correlated_eps,
    analytic_iid_eps,
    build_schedule,
    ddim_step,
    exp_decay_covariance,
    reverse_moments,
    substream,
)

sched = build_schedule(50, 0.004, 0.35)
rng = substream(0, "demo-denoise")

# Under an i.i.d. N(mu, var0) data model the posterior mean interpolates
# between the observation and the prior mean: at high t (little signal)
# it hugs the prior, at low t it trusts the observation.
model = GaussianDataModel(mean=0.3, variance=0.25)
z = rng.standard_normal((4, 4, 1))
for t in (50, 25, 1):
    eps = analytic_iid_eps(z, t, model, sched)
    abar = sched.alpha_bar(t)
    posterior = (z - np.sqrt(1.0 - abar) * eps) / np.sqrt(abar)
    print(f"t={t:2d}: posterior mean of first cell {float(posterior[0, 0, 0]):+.4f} "
          f"(observation {float(z[0, 0, 0]):+.4f}, prior mean +0.3000)")

# A correlated data model pulls neighboring cells toward each other. Feed
# a latent with one spike: the correlated posterior spreads it, the i.i.d.
# posterior cannot.
spike = np.zeros((8, 8, 1))
spike[4, 4, 0] = 3.0
cov = exp_decay_covariance(8, 8, 1, length_scale=2.0, variance=0.25)
corr_model = GaussianDataModel(mean=0.0, variance=cov)
iid_model = GaussianDataModel(mean=0.0, variance=0.25)
t = 10
abar = sched.alpha_bar(t)
for label, eps in (
    ("correlated", analytic_correlated_eps(spike, t, corr_model, sched)),
    ("iid       ", analytic_iid_eps(spike, t, iid_model, sched)),
):
    posterior = (spike - np.sqrt(1.0 - abar) * eps) / np.sqrt(abar)
    print(f"{label} posterior: center {float(posterior[4, 4, 0]):+.4f}, "
          f"neighbor {float(posterior[4, 5, 0]):+.4f}, "
          f"far corner {float(posterior[0, 0, 0]):+.4f}")

# Because the i.i.d. denoiser is affine per pixel, the entire reverse chain
# is one scalar affine recursion. Predict the final distribution, then
# check it against a Monte Carlo run of independent pixels.
mean_0, var_0 = reverse_moments(sched, 50, 0, GaussianDataModel(mean=0.3, variance=0.25))
print("recursion predicts final mean/var:", round(mean_0, 5), round(var_0, 5))

backend = GaussianIIDBackend(GaussianDataModel(mean=0.3, variance=0.25))
current = substream(7, "demo-mc").standard_normal((100, 100, 1))
for t in range(50, 0, -1):
    req = DenoiseRequest(latent=current, t=t, condition="", request_id=0)
    current = ddim_step(current, backend.predict(req, sched), t, sched)
print("Monte Carlo (n=10000) measured:    ",
      round(float(current.mean()), 5), round(float(current.var(ddof=1)), 5))
