"""Command line entry point: ``ucbd3 {run,gen,bounds,heatmap}``.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 I/O error.
Agents, arms and phases are printed 1-based.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import analysis
from .market import InstanceError, NotOSB, gen_hard_lb, gen_osb, gen_spaced, load_instance, save_instance
from .runner import (HEATMAP_COLUMNS, ConfigError, format_table, heatmap_rows, load_config,
                     read_communicated, run_experiment)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="master seed (run) or generator seed (gen)")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker processes for run")
    p.add_argument("--format", choices=["csv", "json"], default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="ucbd3", parents=[common],
                     description="Decentralized serial-dictatorship bandit simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", parents=[common], help="run an experiment config")
    run.add_argument("config")
    run.add_argument("-o", "--output", help="output directory (overrides the config)")

    gen = sub.add_parser("gen", parents=[common], help="write a generated instance file")
    gen.add_argument("kind", choices=["osb", "spaced", "hard-lb"])
    gen.add_argument("--agents", type=int, required=True)
    gen.add_argument("--arms", type=int, required=True)
    gen.add_argument("--target", type=int, help="target rank (hard-lb)")
    gen.add_argument("--delta", type=float, help="gap of higher ranked agents (hard-lb)")
    gen.add_argument("-o", "--output", required=True)

    bounds = sub.add_parser("bounds", parents=[common], help="print regret bounds for an instance")
    bounds.add_argument("instance")
    bounds.add_argument("--agent", type=int, required=True, help="1-based rank")
    bounds.add_argument("--horizon", type=float, required=True)
    bounds.add_argument("--alpha", type=float, default=2.0)

    heat = sub.add_parser("heatmap", parents=[common], help="phase x agent x arm broadcast counts")
    heat.add_argument("run_dir")
    heat.add_argument("--algorithm", help="algorithm id (default: first with broadcasts)")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if hasattr(args, "seed"):
        cfg.master_seed = args.seed
    res = run_experiment(cfg, args.output, getattr(args, "jobs", 1), getattr(args, "format", "csv"))
    print(json.dumps({k: v for k, v in res["summary"].items()}, indent=2))
    print(f"outputs in {res['output_dir']}", file=sys.stderr)
    return EXIT_OK


def _cmd_gen(args) -> int:
    seed = getattr(args, "seed", 0)
    if args.kind == "osb":
        inst = gen_osb(args.agents, args.arms, seed)
    elif args.kind == "spaced":
        inst = gen_spaced(args.agents, args.arms, seed)
    else:
        if args.target is None or args.delta is None:
            raise UsageError("gen hard-lb needs --target and --delta")
        inst = gen_hard_lb(args.target, args.agents, args.arms, args.delta, seed)
    save_instance(inst, args.output)
    return EXIT_OK


def _cmd_bounds(args) -> int:
    inst = load_instance(args.instance)
    n = inst.n_agents
    if not 1 <= args.agent <= n:
        raise ConfigError(f"--agent must be in [1, {n}]")
    if args.alpha < 2 or args.horizon < 2:
        raise ConfigError("need --alpha >= 2 and --horizon >= 2")
    report = analysis.bound_report(inst, args.horizon, args.alpha)
    j = args.agent
    try:
        lower = analysis.lower_bound_thm2(inst, j, args.horizon)
    except NotOSB:
        lower = "NotOSB"
    doc = {
        "agent": j,
        "horizon": args.horizon,
        "alpha": args.alpha,
        "delta": report.delta,
        "i_star": report.i_star,
        "upper_bound": float(report.upper_cor1[j - 1]),
        "remainder_scale": report.remainder_scale,
        "lower_bound": lower,
        "epsilon": [{"agent": r["agent"], "epsilon": r["epsilon"]} for r in report.rows()],
    }
    if getattr(args, "format", "csv") == "json":
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    print(f"agent            {j}")
    print(f"delta            {report.delta:.12g}")
    print(f"i_star           {report.i_star}")
    print(f"upper_bound      {doc['upper_bound']:.12g}")
    print(f"remainder_scale  {report.remainder_scale:.12g}")
    print(f"lower_bound      {lower if isinstance(lower, str) else format(lower, '.12g')}")
    print("agent,epsilon")
    for r in doc["epsilon"]:
        print(f"{r['agent']},{r['epsilon']:.12g}")
    return EXIT_OK


def _cmd_heatmap(args) -> int:
    algorithm, runs, n_arms = read_communicated(args.run_dir, args.algorithm)
    if not runs:
        raise ConfigError(f"no broadcasts recorded for algorithm {algorithm!r}")
    counts = analysis.heatmap_aggregate(runs, n_arms)
    sys.stdout.write(format_table(HEATMAP_COLUMNS, heatmap_rows(counts),
                                  getattr(args, "format", "csv")))
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "gen": _cmd_gen, "bounds": _cmd_bounds, "heatmap": _cmd_heatmap}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (ConfigError, InstanceError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
