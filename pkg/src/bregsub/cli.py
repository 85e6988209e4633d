"""Command line entry point: ``bregsub run|sweep|diagnose|selftest``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, parse_config
from .diagnostics import diagnose, format_report
from .experiment import run_experiment, sweep
from .selftest import selftest


def _int_list(text):
    return [int(s) for s in text.split(",") if s.strip()]


def _float_list(text):
    return [float(s) for s in text.replace(",", " ").split()]


def _parser():
    p = argparse.ArgumentParser(prog="bregsub",
                                description="Stochastic Bregman subgradient experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment from a config file")
    r.add_argument("config")
    r.add_argument("--seed", type=int, help="override sampler.seed")
    r.add_argument("--out", help="override output.dir")

    s = sub.add_parser("sweep", help="run a seeds x eta0 grid")
    s.add_argument("config")
    s.add_argument("--seeds", type=_int_list, required=True, help="comma separated, e.g. 0,1,2")
    s.add_argument("--eta0-grid", type=_float_list, nargs="+",
                   help="eta0 values, comma or space separated")
    s.add_argument("--out", help="override output.dir")
    s.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    d = sub.add_parser("diagnose", help="summarize a trace.csv into report.txt")
    d.add_argument("trace")
    d.add_argument("--tau", type=float, help="momentum ratio for Lyapunov diagnostics")

    t = sub.add_parser("selftest", help="run fast property checks")
    t.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return run_experiment(parse_config(args.config), out_dir=args.out, seed=args.seed)
        if args.command == "sweep":
            grid = [v for chunk in args.eta0_grid for v in chunk] if args.eta0_grid else None
            report = sweep(parse_config(args.config), args.seeds, grid,
                           out_dir=args.out, jobs=args.jobs)
            for row in report:
                print(", ".join(f"{k}={v}" for k, v in row.items()))
            return 0 if all(row["failed"] == 0 for row in report) else 1
        if args.command == "diagnose":
            print(format_report(diagnose(args.trace, tau=args.tau)), end="")
            return 0
        return 0 if selftest(args.seed) else 1
    except ConfigError as err:
        print(err, file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
