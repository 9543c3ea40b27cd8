"""Config, latent, and image serialization.

Config documents are JSON with a fixed key set (see CONFIG_KEYS); unknown
keys are rejected by name so typos surface immediately. Latents are stored
as a little-endian binary payload (magic "CDL1" + raw row-major floats)
next to a JSON sidecar carrying shape, dtype, seed, and the producing
config's hash; the pair round-trips bit-exactly on any platform. Images
are binary PPM (P6) with a documented per-channel affine map, standing in
for a real decoder.
"""

import hashlib
import json
import pathlib

import numpy as np

from .errors import ConfigError, InvariantViolation
from .pipeline import RunConfig

LATENT_MAGIC = b"CDL1"

CONFIG_KEYS = {
    "base": "list [h, w, c] of the patch size the denoiser serves (required)",
    "target": "list [h, w] of the canvas size to generate (required)",
    "steps": "total diffusion steps T (default 50)",
    "t_prime": "phase boundary T' (default steps // 2)",
    "stride": "list [d_h, d_w] of window strides (default half the base)",
    "seed": "run seed (default 0)",
    "denoiser": "backend name: zero | gauss-iid | gauss-corr | remote",
    "denoiser_params": "mapping of backend parameters",
    "condition": "opaque condition string passed to the backend",
    "no_interaction": "disable the phase-1 pixel shuffle",
    "copy_mode": "replicate one patch instead of sampling independently",
    "eq1_verbatim": "use the uncorrected reverse-step noise coefficient",
    "interaction_interval": "steps between pixel shuffles (default 1)",
    "beta_start": "first retention-loss value (default 0.004)",
    "beta_end": "last retention-loss value (default 0.35)",
}

_DTYPES = {"f32": "<f4", "f64": "<f8"}


def _expect_int_list(doc, key, length):
    value = doc[key]
    if (
        not isinstance(value, list)
        or len(value) != length
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise ConfigError(key, f"must be a list of {length} integers, got {value!r}")
    return value


def config_from_dict(doc: dict) -> RunConfig:
    """Validate a parsed config document and fill defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("config", "document must be a JSON object")
    for key in doc:
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown key")
    for key in ("base", "target"):
        if key not in doc:
            raise ConfigError(key, "required key is missing")
    base = _expect_int_list(doc, "base", 3)
    target = _expect_int_list(doc, "target", 2)
    steps = doc.get("steps", 50)
    if not isinstance(steps, int) or isinstance(steps, bool):
        raise ConfigError("steps", f"must be an integer, got {steps!r}")
    t_prime = doc.get("t_prime", steps // 2 if steps > 1 else 1)
    stride = (
        _expect_int_list(doc, "stride", 2) if "stride" in doc else [0, 0]
    )

    def scalar(key, default, kinds, kind_name):
        value = doc.get(key, default)
        if not isinstance(value, kinds) or isinstance(value, bool) != (kinds is bool):
            raise ConfigError(key, f"must be {kind_name}, got {value!r}")
        return value

    params = doc.get("denoiser_params", {})
    if not isinstance(params, dict):
        raise ConfigError("denoiser_params", "must be a mapping")
    return RunConfig(
        base_h=base[0], base_w=base[1], channels=base[2],
        target_h=target[0], target_w=target[1],
        steps=steps,
        t_prime=scalar("t_prime", t_prime, int, "an integer"),
        stride_h=stride[0], stride_w=stride[1],
        seed=scalar("seed", 0, int, "an integer"),
        denoiser=scalar("denoiser", "gauss-iid", str, "a string"),
        denoiser_params=params,
        condition=scalar("condition", "", str, "a string"),
        no_interaction=scalar("no_interaction", False, bool, "a boolean"),
        copy_mode=scalar("copy_mode", False, bool, "a boolean"),
        eq1_verbatim=scalar("eq1_verbatim", False, bool, "a boolean"),
        interaction_interval=scalar("interaction_interval", 1, int, "an integer"),
        beta_start=float(scalar("beta_start", 0.004, (int, float), "a number")),
        beta_end=float(scalar("beta_end", 0.35, (int, float), "a number")),
    )


def load_config(path) -> RunConfig:
    """Read and validate a JSON config file."""
    text = pathlib.Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"not valid JSON: {exc}")
    return config_from_dict(doc)


def config_to_dict(cfg: RunConfig) -> dict:
    """Canonical document form; load_config(save_config(cfg)) == cfg."""
    return {
        "base": [cfg.base_h, cfg.base_w, cfg.channels],
        "target": [cfg.target_h, cfg.target_w],
        "steps": cfg.steps,
        "t_prime": cfg.t_prime,
        "stride": [cfg.stride_h, cfg.stride_w],
        "seed": cfg.seed,
        "denoiser": cfg.denoiser,
        "denoiser_params": dict(cfg.denoiser_params),
        "condition": cfg.condition,
        "no_interaction": cfg.no_interaction,
        "copy_mode": cfg.copy_mode,
        "eq1_verbatim": cfg.eq1_verbatim,
        "interaction_interval": cfg.interaction_interval,
        "beta_start": cfg.beta_start,
        "beta_end": cfg.beta_end,
    }


def save_config(cfg: RunConfig, path):
    pathlib.Path(path).write_text(
        json.dumps(config_to_dict(cfg), sort_keys=True, indent=2) + "\n"
    )


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical config serialization."""
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _sidecar_path(path) -> pathlib.Path:
    return pathlib.Path(path).with_suffix(".json")


def save_latent(path, latent: np.ndarray, dtype: str = "f64", seed: int = 0,
                config_digest: str = ""):
    """Write the payload file at ``path`` and its JSON sidecar beside it."""
    if dtype not in _DTYPES:
        raise ConfigError("dtype", f"must be one of {sorted(_DTYPES)}, got {dtype!r}")
    latent = np.asarray(latent)
    if latent.ndim != 3:
        raise InvariantViolation(f"latent must be rank 3, got shape {latent.shape}")
    payload = LATENT_MAGIC + np.ascontiguousarray(latent, dtype=_DTYPES[dtype]).tobytes()
    pathlib.Path(path).write_bytes(payload)
    sidecar = {
        "shape": list(latent.shape),
        "dtype": dtype,
        "seed": int(seed),
        "config_hash": config_digest,
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def load_latent(path) -> np.ndarray:
    """Read a latent payload back, bit-exactly, in its stored dtype."""
    sidecar_file = _sidecar_path(path)
    if not sidecar_file.exists():
        raise InvariantViolation(f"missing sidecar {sidecar_file}")
    sidecar = json.loads(sidecar_file.read_text())
    shape = sidecar.get("shape")
    dtype = sidecar.get("dtype")
    if dtype not in _DTYPES:
        raise InvariantViolation(f"sidecar dtype {dtype!r} is not f32/f64")
    if not isinstance(shape, list) or len(shape) != 3:
        raise InvariantViolation(f"sidecar shape {shape!r} is not [h, w, c]")
    raw = pathlib.Path(path).read_bytes()
    if raw[:4] != LATENT_MAGIC:
        raise InvariantViolation(f"bad magic {raw[:4]!r} in {path}")
    body = raw[4:]
    count = shape[0] * shape[1] * shape[2]
    itemsize = 4 if dtype == "f32" else 8
    if len(body) != count * itemsize:
        raise InvariantViolation(
            f"payload holds {len(body)} bytes, sidecar shape needs {count * itemsize}"
        )
    return np.frombuffer(body, dtype=_DTYPES[dtype]).reshape(shape).copy()


def save_image_ppm(latent: np.ndarray, path):
    """Toy decoder: per-channel affine [min, max] -> [0, 255], binary PPM.

    Single-channel latents are replicated to gray RGB; a channel with no
    spread maps to mid-gray 128. Rounding is to nearest, ties to even.
    """
    latent = np.asarray(latent, dtype=np.float64)
    if latent.ndim != 3 or latent.shape[2] not in (1, 3):
        raise ConfigError(
            "channels", f"PPM needs 1 or 3 channels, got shape {latent.shape}"
        )
    h, w, c = latent.shape
    if c == 1:
        latent = np.repeat(latent, 3, axis=2)
    lo = latent.reshape(-1, 3).min(axis=0)
    hi = latent.reshape(-1, 3).max(axis=0)
    span = hi - lo
    bytes_img = np.empty((h, w, 3), dtype=np.uint8)
    for ch in range(3):
        if span[ch] == 0.0:
            bytes_img[:, :, ch] = 128
        else:
            scaled = (latent[:, :, ch] - lo[ch]) / span[ch] * 255.0
            bytes_img[:, :, ch] = np.rint(scaled).astype(np.uint8)
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    pathlib.Path(path).write_bytes(header + bytes_img.tobytes())
