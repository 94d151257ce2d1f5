"""Command-line entry: one subcommand per lab.

Exit codes: 0 success, 2 config/schema violation (message names the
field), 3 numeric failure inside a lab.
"""
from __future__ import annotations

import argparse
import sys

from .rngtools import default_threads
from .runner import SCHEMAS, NumericFailure, SchemaError, run

_FLAG_HELP = {
    "alpha": "stability index in (0, 2]",
    "d": "spatial dimension",
    "lambda": "node intensity per unit volume",
    "radius": "radius law: const:r | uniform:a:b | pareto:s:k | "
              "discrete:v1,v2@p1,p2",
    "target": "target motion: static | linear:beta:x,y | levy | table:csv",
    "T": "time horizon (comma list for sausage ladders)",
    "h": "time step of the skeleton grid",
    "n": "number of replicas",
    "seed": "master seed (64-bit)",
    "window": "window halfwidth (0 = use the planner)",
    "eps_trunc": "omitted-detector budget for the window planner",
    "constants": "path to calibrated constants JSON",
    "method": "direct | void | both",
    "out_times": "comma list of output times (void curves)",
    "k_ladder": "comma list of set scales",
    "eps": "net radius for coverage proxies",
    "set": "target set: cube | segment | cantor:levels",
    "t_max": "censoring horizon (0 = auto)",
    "V": "box volume",
    "M": "number of marks",
    "xi": "count-slack parameter in (0, 1)",
    "t": "number of integer times",
    "rho": "giant mass-fraction floor (0 = half the measured fraction)",
    "tolerance": "bracket width for the bisection",
    "h_check": "1 to run the step-halving diagnostic",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levybool",
        description="Monte Carlo labs for mobile Boolean models with "
                    "heavy-tailed node motion")
    sub = parser.add_subparsers(dest="lab", required=True)
    for lab, schema in SCHEMAS.items():
        p = sub.add_parser(lab)
        p.add_argument("--config", default=None,
                       help="INI file with a [%s] section" % lab)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: LEVYBOOL_THREADS or 1)")
        for key in schema:
            p.add_argument("--" + key.replace("_", "-"), dest=key,
                           default=None, help=_FLAG_HELP.get(key, ""))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {key: getattr(args, key) for key in SCHEMAS[args.lab]
                 if getattr(args, key, None) is not None}
    threads = args.threads if args.threads is not None else default_threads()
    try:
        artifacts = run(args.lab, args.config, overrides, args.out,
                        threads=threads)
    except SchemaError as exc:
        print(f"config error at {exc.field_path}: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    for path in artifacts:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
