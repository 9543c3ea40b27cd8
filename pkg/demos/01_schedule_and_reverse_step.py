"""Variance schedule and the deterministic reverse step
=======================================================

Builds the default linear-beta schedule, walks a single latent through the
whole reverse chain with the exact zero-noise predictor, and shows why the
corrected reverse-step coefficient matters.
"""

import numpy as np

from cutdiffusion import ZeroBackend, build_schedule, ddim_step, predicted_x0, substream

# The default schedule retains almost no signal at t=T, so starting the
# reverse chain from a pure standard normal is consistent.
sched = build_schedule(50, 0.004, 0.35)
print("alpha_bar at t=1: ", sched.alpha_bar(1))
print("alpha_bar at t=T: ", sched.alpha_bar(50))

# A zero noise prediction means the sampler treats the latent as pure
# signal; each step then just rescales. Chaining all T steps must land on
# the same point as jumping straight to the predicted clean latent.
z = substream(0, "demo-schedule").standard_normal((4, 4, 1))
backend = ZeroBackend()
current = z.copy()
for t in range(50, 0, -1):
    eps = np.zeros_like(current)
    current = ddim_step(current, eps, t, sched)
jump = predicted_x0(z, np.zeros_like(z), 50, sched)
print("max |chained - jumped|:", float(np.max(np.abs(current - jump))))

# The uncorrected coefficient from the printed update rule drops a
# sqrt(alpha_bar_{t-1}) factor on the noise term; with a nonzero noise
# prediction the two trajectories separate immediately.
eps = substream(1, "demo-eps").standard_normal((4, 4, 1))
corrected = ddim_step(z, eps, 50, sched)
verbatim = ddim_step(z, eps, 50, sched, eq1_verbatim=True)
print("corrected vs verbatim, max |diff|:", float(np.max(np.abs(corrected - verbatim))))
print("(identical only when the noise prediction is zero)")
