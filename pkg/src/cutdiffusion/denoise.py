"""Noise-prediction contract and backends.

A backend answers one question: given a noisy latent z_t, which noise eps
was mixed in? The pipeline treats backends as black boxes behind
``predict_noise``. Shipped backends:

- ``zero``: eps = 0, for closed-form telescoping checks.
- ``gauss-iid``: Bayes-optimal denoiser for x0 ~ N(mu, var * I); the
  posterior mean is elementwise, so the predicted noise is affine in z.
- ``gauss-corr``: same, for a full covariance over the flattened latent;
  exercises cross-pixel coupling. Dense solve, capped at 4096 dimensions.
- ``remote``: forwards requests over the CDN1 wire protocol.

All analytic backends ignore the condition string; the remote backend
passes it through verbatim.
"""

import math
import threading
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CapacityError, ConfigError, InvariantViolation, ProtocolViolation
from .schedule import VarianceSchedule


@dataclass(frozen=True)
class DenoiseRequest:
    """Arguments of one noise prediction: latent, step, condition text."""

    latent: np.ndarray
    t: int
    condition: str = ""
    request_id: int = 0


@dataclass(frozen=True)
class GaussianDataModel:
    """Clean-data law x0 ~ N(mean, variance).

    ``mean`` is a scalar or an array broadcastable to the latent shape.
    ``variance`` is either a positive scalar (i.i.d. pixels) or a full
    covariance matrix over the flattened latent. Matrix definiteness is
    fully checked at solve time; construction checks shape and symmetry.
    """

    mean: object = 0.0
    variance: object = 1.0

    def __post_init__(self):
        var = self.variance
        if np.ndim(var) == 0:
            if not float(var) > 0.0:
                raise ConfigError("variance", f"must be strictly positive, got {var}")
        elif np.ndim(var) == 2:
            var = np.asarray(var, dtype=np.float64)
            if var.shape[0] != var.shape[1]:
                raise ConfigError("variance", f"covariance must be square, got {var.shape}")
            if not np.allclose(var, var.T, rtol=1e-12, atol=0.0):
                raise ConfigError("variance", "covariance must be symmetric")
            object.__setattr__(self, "variance", var)
        else:
            raise ConfigError("variance", "must be a scalar or a 2-D covariance matrix")

    @property
    def is_scalar(self) -> bool:
        return np.ndim(self.variance) == 0


CORRELATED_DIM_CAP = 4096


def _check_request(z: np.ndarray, t: int, sched: VarianceSchedule) -> float:
    if not 1 <= t <= sched.T:
        raise IndexError(f"step {t} outside 1..{sched.T}")
    abar = sched.alpha_bar(t)
    if abar >= 1.0:
        # would divide by sqrt(1 - abar) = 0
        raise InvariantViolation(f"alpha_bar({t}) = 1 leaves no noise to predict")
    return abar


def analytic_iid_eps(
    z: np.ndarray, t: int, model: GaussianDataModel, sched: VarianceSchedule
) -> np.ndarray:
    """Predicted noise under an i.i.d. Gaussian data model.

    Posterior mean E[x0|z] = (sqrt(abar) * var * z + (1-abar) * mean) / D
    with D = abar * var + (1-abar); eps = (z - sqrt(abar) * E) / sqrt(1-abar).
    """
    if not model.is_scalar:
        raise ConfigError("variance", "i.i.d. denoiser requires a scalar variance")
    z = np.asarray(z, dtype=np.float64)
    abar = _check_request(z, t, sched)
    var = float(model.variance)
    root = math.sqrt(abar)
    denom = abar * var + (1.0 - abar)
    post = (root * var * z + (1.0 - abar) * np.asarray(model.mean, dtype=np.float64)) / denom
    return (z - root * post) / math.sqrt(1.0 - abar)


def analytic_correlated_eps(
    z: np.ndarray, t: int, model: GaussianDataModel, sched: VarianceSchedule
) -> np.ndarray:
    """Predicted noise under a correlated Gaussian data model.

    E[x0|z] = mean + sqrt(abar) * C (abar C + (1-abar) I)^{-1} (z - sqrt(abar) mean)
    over the flattened latent, solved densely without forming an inverse.
    """
    if model.is_scalar:
        raise ConfigError("variance", "correlated denoiser requires a covariance matrix")
    z = np.asarray(z, dtype=np.float64)
    abar = _check_request(z, t, sched)
    cov = model.variance
    n = z.size
    if n > CORRELATED_DIM_CAP:
        raise CapacityError(
            f"flattened latent has {n} entries; dense solve capped at {CORRELATED_DIM_CAP}"
        )
    if cov.shape[0] != n:
        raise InvariantViolation(
            f"covariance is {cov.shape[0]}x{cov.shape[0]} but latent flattens to {n}"
        )
    root = math.sqrt(abar)
    mean = np.broadcast_to(np.asarray(model.mean, dtype=np.float64), z.shape).ravel()
    resid = z.ravel() - root * mean
    lhs = abar * cov + (1.0 - abar) * np.eye(n)
    try:
        factor = scipy.linalg.cho_factor(lhs)
    except scipy.linalg.LinAlgError:
        raise ConfigError("variance", "covariance must be symmetric positive-definite")
    post = mean + root * (cov @ scipy.linalg.cho_solve(factor, resid))
    return ((z.ravel() - root * post) / math.sqrt(1.0 - abar)).reshape(z.shape)


def reverse_moments(
    sched: VarianceSchedule,
    t_from: int,
    t_to: int,
    model: GaussianDataModel = None,
    eq1_verbatim: bool = False,
):
    """Exact marginal mean and variance of the deterministic reverse pass.

    Starting from z_{t_from} ~ N(0, 1) per pixel and stepping to t_to with
    the i.i.d. analytic backend (or the zero backend when ``model`` is
    None), every step is affine in z, so the marginal law stays Gaussian
    and its moments follow a two-number recursion. This is the engine's own
    reference for distribution checks; it does not assume the terminal law
    equals the data law.
    """
    if not 0 <= t_to <= t_from <= sched.T:
        raise IndexError(f"need 0 <= t_to <= t_from <= {sched.T}")
    if model is not None:
        if not model.is_scalar:
            raise ConfigError("variance", "moment recursion needs a scalar variance")
        if np.ndim(model.mean) != 0:
            raise ConfigError("mean", "moment recursion needs a scalar mean")
    mean, var = 0.0, 1.0
    for t in range(t_from, t_to, -1):
        abar_t = sched.alpha_bar(t)
        abar_prev = sched.alpha_bar(t - 1)
        if model is None:
            a = b = 0.0
        else:
            var0 = float(model.variance)
            mu = float(model.mean)
            denom = abar_t * var0 + (1.0 - abar_t)
            a = math.sqrt(1.0 - abar_t) / denom
            b = -math.sqrt(abar_t) * math.sqrt(1.0 - abar_t) * mu / denom
        c = math.sqrt(abar_prev / abar_t)
        d = math.sqrt(1.0 / abar_prev - 1.0) - math.sqrt(1.0 / abar_t - 1.0)
        if not eq1_verbatim:
            d *= math.sqrt(abar_prev)
        big_a = c + d * a
        big_b = d * b
        mean = big_a * mean + big_b
        var = big_a * big_a * var
    return mean, var


def exp_decay_covariance(
    h: int, w: int, c: int, length_scale: float, variance: float = 1.0
) -> np.ndarray:
    """Exponential-decay spatial covariance over a flattened h x w x c latent.

    Cov between two cells is variance * exp(-euclidean distance / length_scale)
    within a channel and zero across channels (block structure matching the
    row-major pixel-then-channel flattening order).
    """
    if length_scale <= 0.0:
        raise ConfigError("length_scale", f"must be positive, got {length_scale}")
    if variance <= 0.0:
        raise ConfigError("variance", f"must be positive, got {variance}")
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    pts = np.stack([rows.ravel(), cols.ravel()], axis=1).astype(np.float64)
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    spatial = variance * np.exp(-dist / length_scale)
    if c == 1:
        return spatial
    return np.kron(spatial, np.eye(c))


class ZeroBackend:
    """Predicts eps = 0 everywhere."""

    name = "zero"

    def predict(self, req: DenoiseRequest, sched: VarianceSchedule) -> np.ndarray:
        if not 1 <= req.t <= sched.T:
            raise IndexError(f"step {req.t} outside 1..{sched.T}")
        return np.zeros_like(np.asarray(req.latent, dtype=np.float64))


class GaussianIIDBackend:
    """Closed-form denoiser for i.i.d. Gaussian clean data."""

    name = "gauss-iid"

    def __init__(self, model: GaussianDataModel):
        if not model.is_scalar:
            raise ConfigError("variance", "gauss-iid requires a scalar variance")
        self.model = model

    def predict(self, req: DenoiseRequest, sched: VarianceSchedule) -> np.ndarray:
        return analytic_iid_eps(req.latent, req.t, self.model, sched)


class GaussianCorrelatedBackend:
    """Closed-form denoiser for spatially correlated Gaussian clean data."""

    name = "gauss-corr"

    def __init__(self, model: GaussianDataModel):
        if model.is_scalar:
            raise ConfigError("variance", "gauss-corr requires a covariance matrix")
        self.model = model

    def predict(self, req: DenoiseRequest, sched: VarianceSchedule) -> np.ndarray:
        return analytic_correlated_eps(req.latent, req.t, self.model, sched)


class RemoteBackend:
    """Forwards noise prediction over the CDN1 wire protocol.

    One request is in flight per connection; concurrent callers share the
    connection behind a lock. Shape and step count are negotiated with a
    hello frame on first use.
    """

    name = "remote"

    def __init__(self, address: str, shape: tuple, T: int, connect=None):
        from . import wire

        self.shape = tuple(shape)
        self.T = T
        self._lock = threading.Lock()
        self._client = wire.Client(address, connect=connect)
        self._hello_done = False

    def _ensure_hello(self):
        if not self._hello_done:
            self._client.hello(self.shape, self.T)
            self._hello_done = True

    def predict(self, req: DenoiseRequest, sched: VarianceSchedule) -> np.ndarray:
        with self._lock:
            self._ensure_hello()
            out = self._client.eps(
                np.asarray(req.latent), req.t, req.condition, req.request_id
            )
        if out.shape != np.asarray(req.latent).shape:
            raise ProtocolViolation(
                f"server returned shape {out.shape}, expected {np.asarray(req.latent).shape}"
            )
        return out.astype(np.float64)

    def decode(self, latent: np.ndarray, request_id: int = 0) -> bytes:
        with self._lock:
            self._ensure_hello()
            return self._client.decode(np.asarray(latent), request_id)

    def close(self):
        self._client.close()


class CountingBackend:
    """Wraps a backend and counts predict calls; used to audit cost reports."""

    def __init__(self, inner):
        self.inner = inner
        self.name = inner.name
        self.calls = 0
        self._lock = threading.Lock()

    def predict(self, req: DenoiseRequest, sched: VarianceSchedule) -> np.ndarray:
        with self._lock:
            self.calls += 1
        return self.inner.predict(req, sched)


def predict_noise(backend, req: DenoiseRequest, sched: VarianceSchedule) -> np.ndarray:
    """Ask a backend for the noise in req.latent at step req.t."""
    latent = np.asarray(req.latent)
    if latent.ndim != 3:
        raise InvariantViolation(f"latent must be rank 3, got shape {latent.shape}")
    if not 1 <= req.t <= sched.T:
        raise IndexError(f"step {req.t} outside 1..{sched.T}")
    out = backend.predict(req, sched)
    if out.shape != latent.shape:
        raise InvariantViolation(
            f"backend {backend.name} returned shape {out.shape} for input {latent.shape}"
        )
    return out


def make_backend(name: str, params: dict, shape: tuple, T: int):
    """Build a backend from its registry name and parameter mapping.

    ``shape`` is the patch shape (h, w, c) the backend will serve; the
    correlated backend sizes its covariance from it and the remote backend
    negotiates it. Unknown parameter keys are rejected.
    """
    params = dict(params or {})

    def take(key, default):
        return params.pop(key, default)

    if name == "zero":
        backend = ZeroBackend()
    elif name == "gauss-iid":
        backend = GaussianIIDBackend(
            GaussianDataModel(mean=take("mean", 0.0), variance=take("variance", 1.0))
        )
    elif name == "gauss-corr":
        h, w, c = shape
        cov = exp_decay_covariance(
            h, w, c, take("length_scale", 2.0), take("variance", 1.0)
        )
        backend = GaussianCorrelatedBackend(
            GaussianDataModel(mean=take("mean", 0.0), variance=cov)
        )
    elif name == "remote":
        import os

        address = take("address", os.environ.get("CUTDIFFUSION_REMOTE", ""))
        if not address:
            raise ConfigError(
                "address",
                "remote backend needs denoiser_params.address or CUTDIFFUSION_REMOTE",
            )
        backend = RemoteBackend(address, shape, T)
    else:
        raise ConfigError("denoiser", f"unknown backend {name!r}")
    if params:
        raise ConfigError(
            "denoiser_params", f"unknown keys for {name}: {sorted(params)}"
        )
    return backend
