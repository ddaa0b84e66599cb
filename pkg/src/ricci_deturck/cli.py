"""Command-line entry point: ``ricci-deturck <subcommand> ...``."""
import argparse
import json
import os
import sys
from dataclasses import asdict

from . import experiment
from .errors import ConfigError, InsufficientData


def _out_dir(args, cfg):
    return args.out if args.out else os.path.join(os.getcwd(), cfg.name or "run")


def _load(path):
    try:
        return experiment.load_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return None
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        return None


def cmd_run(args, flow=None):
    cfg = _load(args.config)
    if cfg is None:
        return 2
    if flow is not None and cfg.flow != flow:
        print(f"config flow is {cfg.flow!r}; this subcommand runs {flow!r}", file=sys.stderr)
        return 2
    out = _out_dir(args, cfg)
    status = experiment.run_experiment(cfg, out)
    print(f"{cfg.name}: exit {status}, outputs in {out}")
    return status


def cmd_check_identity(args):
    cfg = _load(args.config)
    if cfg is None:
        return 2
    report = experiment.check_identity(cfg, args.levels)
    print(json.dumps(report, indent=2))
    return 0


def cmd_fit_decay(args):
    try:
        fit = experiment.fit_decay_csv(args.series, tuple(args.window) if args.window else None, args.dim, args.p)
    except (InsufficientData, ValueError, OSError) as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(asdict(fit), indent=2))
    return 0


def cmd_study(args):
    cfg = _load(args.config)
    if cfg is None:
        return 2
    report = experiment.convergence_study(cfg, args.levels)
    out = _out_dir(args, cfg)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "study.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    print(json.dumps(report, indent=2))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="ricci-deturck", description="h-flow simulator and verification harness")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an h-flow configuration")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: ./<config name>)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check-identity", help="DeTurck identity discrepancy and its observed order")
    p.add_argument("config")
    p.add_argument("--levels", type=int, default=2, help="number of grids, each halving the spacing (default 2)")
    p.set_defaults(func=cmd_check_identity)

    p = sub.add_parser("fit-decay", help="fit a power law to the sup_dev column of a series CSV")
    p.add_argument("series")
    p.add_argument("--window", type=float, nargs=2, metavar=("T_LO", "T_HI"),
                   help="fit window in time (default: last decade of the series)")
    p.add_argument("--dim", type=int, default=3, help="dimension for the reference exponents")
    p.add_argument("--p", type=float, default=1.0, help="integrability exponent for the reference exponents")
    p.set_defaults(func=cmd_fit_decay)

    p = sub.add_parser("study", help="convergence study over refinement levels")
    p.add_argument("config")
    p.add_argument("--levels", type=int, default=2, help="number of grids, each halving the spacing (default 2)")
    p.add_argument("--out", help="output directory (default: ./<config name>)")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("conformal2d", help="run a conformal 2D configuration")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: ./<config name>)")
    p.set_defaults(func=lambda a: cmd_run(a, flow="conformal2d"))
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "levels", 2) < 2 and args.command == "study":
        print("--levels must be >= 2", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
