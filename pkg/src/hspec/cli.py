"""Command-line entry point: ``hspec run|theory|threshold|spectrum``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .errors import ConfigError


def _grid(text):
    try:
        return harness._floats(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda grid {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="hspec", description="Rank-1 denoising under doubly heteroscedastic noise.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte Carlo sweep, CSV of theory and simulation rows")
    run.add_argument("--config", required=True)
    run.add_argument("--lambda-grid", type=_grid)
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")

    th = sub.add_parser("theory", help="theory table, no sampling")
    th.add_argument("--config", required=True)
    th.add_argument("--out", required=True)
    th.add_argument("--lambda-grid", type=_grid)

    thr = sub.add_parser("threshold", help="print the weak-recovery threshold")
    thr.add_argument("--config", required=True)

    sp = sub.add_parser("spectrum", help="trial-averaged singular values of A and A*")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = harness.load_config(args.config, lambda_grid=args.lambda_grid, trials=args.trials,
                                      base_seed=args.seed, output_path=args.out)
            harness.run_experiment(cfg)
        elif args.command == "theory":
            cfg = harness.load_config(args.config, lambda_grid=args.lambda_grid)
            harness.theory_table(cfg, out=args.out)
        elif args.command == "threshold":
            cfg = harness.load_config(args.config)
            print("%.12g" % harness.build_setting(cfg).lambda_star)
        else:
            cfg = harness.load_config(args.config, trials=args.trials, base_seed=args.seed)
            harness.spectrum_table(cfg, out=args.out)
    except ConfigError as exc:
        print(f"hspec: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"hspec: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
