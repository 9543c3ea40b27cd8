"""Command-line surface: generate, ablate, verify.

Flags map one-to-one onto config document keys; a ``--config`` file gives
the starting document and any flag overrides it. ``generate`` writes the
run artifacts (latent file, PPM image, cost and stat CSV rows) under
``--out-dir``; ``ablate`` sweeps the phase boundary; ``verify`` runs the
release checks.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 backend or transport error.
"""

import argparse
import json
import pathlib
import sys
from dataclasses import replace

from .errors import (
    CapacityError,
    ConfigError,
    CutDiffusionError,
    ProtocolViolation,
    TransportError,
)
from .io import (
    config_from_dict,
    config_hash,
    config_to_dict,
    save_image_ppm,
    save_latent,
)
from .pipeline import (
    run_ablation_sweep,
    run_cutdiffusion,
    run_direct,
    run_multidiffusion_baseline,
)
from .stats import emit_cost_table, emit_stat_table, stat_row
from .verify import render, run_checks

_RUNNERS = {
    "cut": run_cutdiffusion,
    "multi": run_multidiffusion_baseline,
    "direct": run_direct,
}


def _dims(text: str, n: int, flag: str):
    parts = text.lower().split("x")
    if len(parts) != n or not all(p.isdigit() for p in parts):
        raise ConfigError(flag, f"expected {n} integers joined by 'x', got {text!r}")
    return [int(p) for p in parts]


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ConfigError("denoiser-param", f"expected KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _load_doc(path) -> dict:
    try:
        doc = json.loads(pathlib.Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"not valid JSON: {exc}")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config", "document must be a JSON object")
    return doc


def build_config(args):
    """Merge the optional config file with flag overrides."""
    doc = _load_doc(args.config) if args.config else {}
    if args.base:
        doc["base"] = _dims(args.base, 3, "base")
    if args.target:
        doc["target"] = _dims(args.target, 2, "target")
    if args.stride:
        doc["stride"] = _dims(args.stride, 2, "stride")
    for key in (
        "steps", "t_prime", "seed", "denoiser", "condition", "no_interaction",
        "copy_mode", "eq1_verbatim", "interaction_interval", "beta_start", "beta_end",
    ):
        value = getattr(args, key)
        if value is not None:
            doc[key] = value
    if args.denoiser_param:
        params = dict(doc.get("denoiser_params", {}))
        for text in args.denoiser_param:
            key, value = _param(text)
            params[key] = value
        doc["denoiser_params"] = params
    return config_from_dict(doc)


def _out_dir(args) -> pathlib.Path:
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    cfg = build_config(args)
    if args.print_config:
        print(json.dumps(config_to_dict(cfg), sort_keys=True, indent=2))
        return 0
    canvas, report = _RUNNERS[args.method](cfg, workers=args.threads)[:2]
    out = _out_dir(args)
    digest = config_hash(cfg)
    save_latent(out / "latent.bin", canvas, seed=cfg.seed, config_digest=digest)
    save_image_ppm(canvas, out / "image.ppm")
    (out / "cost.csv").write_text(emit_cost_table([report]))
    row = stat_row(args.method, cfg, canvas, at_step=0)
    (out / "stats.csv").write_text(emit_stat_table([row]))
    print(
        f"{args.method}: {report.total_calls} denoiser calls, "
        f"canvas {canvas.shape[0]}x{canvas.shape[1]}x{canvas.shape[2]}, "
        f"artifacts in {out}"
    )
    return 0


def cmd_ablate(args) -> int:
    cfg = build_config(args)
    if args.t_prime_values:
        try:
            values = [int(v) for v in args.t_prime_values.split(",")]
        except ValueError:
            raise ConfigError(
                "t-prime-values", f"expected comma-joined integers, got {args.t_prime_values!r}"
            )
    else:
        values = sorted({1, max(cfg.steps // 2, 1), cfg.steps})
    records = run_ablation_sweep(cfg, t_prime_values=values, workers=args.threads)
    out = _out_dir(args)
    digest = config_hash(cfg)
    rows = []
    for rec in records:
        stem = f"t{rec.t_prime:03d}"
        save_latent(out / f"{stem}.bin", rec.latent, seed=cfg.seed, config_digest=digest)
        save_image_ppm(rec.latent, out / f"{stem}.ppm")
        save_image_ppm(rec.boundary, out / f"{stem}_boundary.ppm")
        rows.extend((rec.row_boundary, rec.row_final))
        print(
            f"t'={rec.t_prime}: {rec.report.total_calls} calls, "
            f"boundary dup {rec.row_boundary.dup_fraction:.3f}, "
            f"final KS {rec.row_final.ks:.5f}"
        )
    (out / "cost.csv").write_text(
        emit_cost_table(
            [replace(r.report, label=f"cut-tp{r.t_prime}") for r in records]
        )
    )
    (out / "stats.csv").write_text(emit_stat_table(rows))
    print(f"sweep artifacts in {out}")
    return 0


def cmd_verify(args) -> int:
    results = run_checks(quick=args.quick)
    print(render(results))
    return 0 if all(r.passed for r in results) else 1


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags below override its keys")
    p.add_argument("--base", help="denoiser patch size HxWxC, e.g. 8x8x1")
    p.add_argument("--target", help="canvas size HxW, each a multiple of the base")
    p.add_argument("--stride", help="window strides DHxDW (default half the base)")
    p.add_argument("--steps", type=int, help="total diffusion steps T")
    p.add_argument("--t-prime", type=int, dest="t_prime", help="phase boundary T'")
    p.add_argument("--seed", type=int, help="run seed")
    p.add_argument(
        "--denoiser", choices=("zero", "gauss-iid", "gauss-corr", "remote"),
        help="noise-prediction backend (remote reads CUTDIFFUSION_REMOTE "
             "when no address parameter is given)",
    )
    p.add_argument(
        "--denoiser-param", action="append", default=[], metavar="KEY=VALUE",
        help="backend parameter, repeatable; values parse as JSON when possible",
    )
    p.add_argument("--condition", help="opaque condition string for the backend")
    p.add_argument("--no-interaction", action="store_const", const=True, default=None,
                   help="disable the phase-1 pixel shuffle")
    p.add_argument("--copy-mode", action="store_const", const=True, default=None,
                   help="replicate one patch instead of sampling independently")
    p.add_argument("--eq1-verbatim", action="store_const", const=True, default=None,
                   help="use the uncorrected reverse-step noise coefficient")
    p.add_argument("--interaction-interval", type=int, help="steps between shuffles")
    p.add_argument("--beta-start", type=float, help="first retention-loss value")
    p.add_argument("--beta-end", type=float, help="last retention-loss value")
    p.add_argument("--threads", type=int, default=1,
                   help="denoiser worker threads; never changes outputs")
    p.add_argument("--out-dir", default="out", help="artifact directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cutdiffusion",
        description="Two-phase patch diffusion for resolution extrapolation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="run one pipeline and write artifacts")
    _add_config_flags(gen)
    gen.add_argument("--method", choices=tuple(_RUNNERS), default="cut",
                     help="pipeline to run (default cut)")
    gen.add_argument("--print-config", action="store_true",
                     help="print the canonical config and exit without running")
    gen.set_defaults(func=cmd_generate)

    abl = sub.add_parser("ablate", help="sweep the phase boundary T'")
    _add_config_flags(abl)
    abl.add_argument("--t-prime-values", metavar="N,N,...",
                     help="boundaries to sweep (default 1, T/2, T)")
    abl.set_defaults(func=cmd_ablate)

    ver = sub.add_parser("verify", help="run the release checks")
    ver.add_argument("--quick", action="store_true", help="skip the slowest checks")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (TransportError, ProtocolViolation, CapacityError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except CutDiffusionError as err:
        print(f"internal error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
