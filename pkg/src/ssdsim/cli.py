"""Command-line interface: run scenarios, convergence studies, certificates."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .anisotropy import certify_stability_grid, get_anisotropy
from .config import load_config
from .diagnostics import convergence_study
from .outputs import write_outputs
from .presets import get_preset, preset_ids
from .run import run_simulation

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssd-sim",
        description="Simulate solid-state dewetting of a thin film on a curved substrate.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario and write its outputs")
    src = run_p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="scenario config file (TOML)")
    src.add_argument("--preset", choices=preset_ids(), help="built-in scenario")
    run_p.add_argument("--out", type=Path, default=None, help="output directory")
    run_p.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    run_p.add_argument(
        "--scheme", choices=("corrected", "uncorrected"), default=None,
        help="override the scheme variant",
    )

    conv_p = sub.add_parser("converge", help="mesh-refinement study against a fine reference")
    conv_p.add_argument("--preset", required=True, choices=preset_ids())
    conv_p.add_argument(
        "--levels", required=True,
        help="comma-separated mesh exponents k (mesh size 2^-k), e.g. 3,4,5",
    )
    conv_p.add_argument("--ref-level", type=int, default=7, help="reference exponent")
    conv_p.add_argument(
        "--t-eval", type=float, default=0.046875,
        help="comparison time (default 3/64, inside the corner-relaxation transient)",
    )
    conv_p.add_argument("--out", type=Path, default=None, help="write convergence.csv here")

    cert_p = sub.add_parser(
        "certify-anisotropy", help="grid certificate of the dissipation inequality"
    )
    cert_p.add_argument("--name", required=True, help="anisotropy name (isotropic, l4)")
    cert_p.add_argument("--grid", type=int, default=360, help="angular resolution")
    return parser


def _cmd_run(args) -> int:
    if args.config is not None:
        config = load_config(args.config)
    else:
        config = get_preset(args.preset)
    if args.seed is not None:
        config = config.replace(solver=config.solver.__class__(
            **{**config.solver.__dict__, "seed": args.seed}
        ))
    if args.scheme is not None:
        config = config.replace(scheme=args.scheme)
    out = args.out or Path(config.out_dir or f"runs/{config.preset or 'scenario'}")
    result = run_simulation(config)
    paths = write_outputs(result, out)
    last = result.series[-1]
    print(
        f"run complete: t={last.time:g}, W={last.energy:.9g}, M={last.mass:.12g}, "
        f"islands={last.n_islands}, wall={result.wall_clock:.1f}s"
    )
    print(f"outputs in {paths['meta'].parent}")
    return 0


def _cmd_converge(args) -> int:
    config = get_preset(args.preset)
    levels = [int(tok) for tok in args.levels.split(",") if tok]
    h_list = [2.0 ** -k for k in levels]
    h_ref = 2.0 ** -args.ref_level
    rows = convergence_study(
        config, h_list, reference=(h_ref, h_ref * h_ref), t_eval=args.t_eval
    )
    print(f"{'h':>12} {'dt':>14} {'error':>14} {'order':>8}")
    lines = ["h,dt,error,order"]
    for row in rows:
        order = f"{row.order:.3f}" if row.order is not None else "-"
        print(f"{row.h:>12.6g} {row.dt:>14.6g} {row.error:>14.6e} {order:>8}")
        lines.append(f"{row.h!r},{row.dt!r},{row.error!r},{order}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "convergence.csv").write_text("\n".join(lines) + "\n")
    return 0


def _cmd_certify(args) -> int:
    aniso = get_anisotropy(args.name)
    worst = certify_stability_grid(aniso, n_angles=args.grid)
    ok = worst >= -1e-12
    print(
        f"anisotropy {args.name!r}: min stability gap {worst:.3e} on the "
        f"{args.grid}x{args.grid}x8 grid -> {'PASS' if ok else 'FAIL'}"
    )
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "converge":
        return _cmd_converge(args)
    if args.command == "certify-anisotropy":
        return _cmd_certify(args)
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
