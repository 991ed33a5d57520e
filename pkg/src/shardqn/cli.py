"""shardqn command line: analytic and simulated sweeps written as CSV."""
from __future__ import annotations

import argparse
import os
import sys

from . import experiments as ex
from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_INTERNAL = 0, 1, 2, 3

DESCRIPTION = """\
Run one experiment described by a flat config file (one `key = value` per
line, lists comma-separated, `#` comments). All rates are in 1/s and
`lambda` is always the per-shard input rate; system throughput is M*lambda.

experiments:
  max-throughput                 analytic lambda_max per M for each dest_dist curve
  sim-vs-theory                  analytic lambda_max next to the simulated saturation rate
  dynamics                       M*lambda at a fixed rho_p for several (b, mu_p) pairs
  comp-sharding-max-shards       max shards under the network cap, saturated shards
  comp-sharding-sub-saturation   max shards under the network cap at given lambdas
  qr-verify                      quasi-reversibility check of a queue with signals

common keys: m or m_range (e.g. 1-64 or 1,2,4,8), b, mu_p, mu_nc, zeta,
dest_dist (0.7,0.3 means D[1]=0.7, D[2]=0.3; separate curves with ';'),
gamma, seed. Simulation keys: horizon (seconds or 'auto'), warmup, window,
step, strategy (bisect|sweep), aggregate_blocks. See README for the rest.

exit codes: 0 ok, 1 config error, 2 verification failure, 3 internal error.
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="shardqn", description=DESCRIPTION,
                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("experiment", choices=ex.EXPERIMENTS)
    ap.add_argument("--config", required=True, metavar="FILE")
    ap.add_argument("--jobs", type=int, default=None, metavar="N",
                    help="worker processes for simulation points (default: number of cores)")
    ap.add_argument("--out", metavar="FILE", help="output file (default: config 'output' or stdout)")
    ap.add_argument("--seed", type=int, default=None, metavar="S",
                    help="base seed; overrides SHARDQN_SEED and the config seed")
    ap.add_argument("--source", choices=ex.SOURCES, default="both")
    ap.add_argument("--plot", metavar="FILE", help="also write a gnuplot script for the CSV")
    return ap


def _seed(args, cfg) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SHARDQN_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"SHARDQN_SEED must be an integer, got {env!r}") from None
    return cfg.integer("seed", 0)


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be ≥ 1")
        cfg = ex.load_config(args.config, args.experiment)
        out = args.out or cfg.raw("output")
        if args.experiment == "qr-verify":
            rep, text = ex.qr_verify(cfg)
            _emit(text, out)
            return EXIT_OK if rep.ok(1e-6) else EXIT_VERIFY
        rows = ex.execute(cfg, source=args.source, seed=_seed(args, cfg), jobs=args.jobs)
        _emit(ex.csv_text(rows), out)
        if args.plot:
            if not out:
                raise ConfigError("--plot needs --out so the script can point at the CSV")
            _emit(ex.plot_script(args.experiment, out, args.plot), args.plot)
        return EXIT_OK
    except ConfigError as exc:
        print(f"shardqn: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"shardqn: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
