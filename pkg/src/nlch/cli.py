"""Command-line entry point.

Subcommands: simulate, dissipative, l-limit, cont-dep, equilibrium,
yosida-sweep, validate, steady.  Exit codes: 0 pass, 1 property failure,
2 config/validation error, 3 solver error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .evolve import SolverError
from .harness import (
    ConfigError,
    GateError,
    RunConfig,
    exp_continuous_dependence,
    exp_dissipative,
    exp_equilibrium,
    exp_l_limit,
    exp_yosida_sweep,
    parse_config,
    run_simulate,
    run_steady,
    run_validate,
)

_EXPERIMENTS = {
    "simulate": run_simulate,
    "dissipative": exp_dissipative,
    "l-limit": exp_l_limit,
    "cont-dep": exp_continuous_dependence,
    "equilibrium": exp_equilibrium,
    "yosida-sweep": exp_yosida_sweep,
    "steady": run_steady,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlch",
        description="Bulk-surface nonlocal phase-field laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(_EXPERIMENTS) + ["validate"]:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", help="output directory (default: config out_dir)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--unsafe-skip-validation", action="store_true",
                       help="run even if the compatibility gate fails")
        if name == "simulate":
            p.add_argument("--dump-mesh", help="write a plain-text mesh listing here")
    return parser


def _load_config(args) -> "RunConfig":
    cfg = parse_config(args.config) if args.config else RunConfig()
    updates = {"experiment": args.command}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out_dir"] = args.out
    return dataclasses.replace(cfg, **updates)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "validate":
            report = run_validate(cfg)
            print(json.dumps(report, indent=2, sort_keys=True, default=float))
            return 0 if report["passed"] else 2
        runner = _EXPERIMENTS[args.command]
        kwargs = {"skip_validation": args.unsafe_skip_validation}
        if args.command == "simulate":
            kwargs["dump_mesh_path"] = args.dump_mesh
        report = runner(cfg, cfg.out_dir, **kwargs)
        print(json.dumps(report, indent=2, sort_keys=True, default=float))
        return 0 if report.get("passed", False) else 1
    except (ConfigError, GateError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
