"""Command-line front end: ``lfpsim <action> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .errors import ConfigError, DomainError, NumericError, SolverError
from .harness import (SimulationConfig, convergence_study, dt_study, run, summary_dict,
                      timing_report, write_atomic)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_NUMERIC = 0, 2, 3, 4


def _config(args) -> SimulationConfig:
    cfg = SimulationConfig.load(args.config) if args.config else SimulationConfig.from_dict({})
    return cfg.with_overrides(args.set)


def _dump(obj):
    sys.stdout.write(yaml.safe_dump(obj, sort_keys=False))


def _write_table(rows, path):
    if path:
        write_atomic(path, yaml.safe_dump(rows, sort_keys=False))


def cmd_run(args):
    cfg = _config(args)
    res = run(cfg, output=args.output)
    _dump(summary_dict(res))


def cmd_convergence(args):
    cfg = _config(args)
    rows = convergence_study(cfg, args.orders, args.reference, args.workers, args.out_dir)
    _write_table(rows, args.table)
    _dump(rows)


def cmd_dt(args):
    cfg = _config(args)
    rows = dt_study(cfg, args.periods, args.reference, args.workers, args.out_dir)
    _write_table(rows, args.table)
    _dump(rows)


def cmd_timing(args):
    base = _config(args)
    cfgs, labels = [], []
    for rate in args.rates:
        cfgs.append(base.with_overrides([f"profile.rate={rate}", "stop.t_end=null"]))
        labels.append(f"{rate:g}C")
    rows = timing_report(cfgs, labels, args.workers)
    _write_table(rows, args.table)
    _dump(rows)


def cmd_print_config(args):
    _dump(_config(args).to_dict())


def cmd_describe_grid(args):
    _dump(_config(args).discretization().describe())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfpsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="action", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("-c", "--config", type=Path, help="YAML config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. grid.N3=8 (repeatable)")
        p.set_defaults(func=func)
        return p

    p = add("run", cmd_run, "simulate one configuration")
    p.add_argument("-o", "--output", type=Path, help="trajectory CSV path")

    for name, func, help_ in (("convergence-study", cmd_convergence, "RMSE against a high-order reference"),
                              ("dt-study", cmd_dt, "residual voltage against a short correction period"),
                              ("timing-report", cmd_timing, "wall clock against simulated time")):
        p = add(name, func, help_)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--table", type=Path, help="also write the table as YAML")
        if name != "timing-report":
            p.add_argument("--out-dir", type=Path, help="directory for per-row trajectories")
        if name == "convergence-study":
            p.add_argument("--orders", type=int, nargs="+", default=[4, 6, 8])
            p.add_argument("--reference", type=int, default=30)
        elif name == "dt-study":
            p.add_argument("--periods", type=float, nargs="+", default=[12.0, 6.0, 3.0, 1.0])
            p.add_argument("--reference", type=float, default=0.5)
        else:
            p.add_argument("--rates", type=float, nargs="+", default=[0.1, 0.2, 0.5, 1.0])

    add("print-config", cmd_print_config, "show the resolved configuration")
    add("describe-grid", cmd_describe_grid, "show nodes, elements and radial roots")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (NumericError, DomainError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
