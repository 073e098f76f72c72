"""Command-line entry points for running and reporting experiments.

Subcommands: ``run`` (execute a JSON-configured experiment), ``report``
(rebuild plots from persisted runs), ``chain`` (two experiments with
warm-start hand-off), ``list-problems``, ``list-solvers``.  Exit codes:
0 success, 2 configuration error, 3 run failure with partial report,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .errors import ChainError, ConfigError, ReportError
from .experiment import (
    ExperimentConfig,
    chain_experiments,
    report_run_dir,
    run_experiment,
    solver_names,
)
from .problems import get_problem, problem_names

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUN_FAILURE = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sego-bench",
        description="Constrained surrogate-optimization benchmark harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config")
    p_run.add_argument("-c", "--config", required=True,
                       help="path to a JSON experiment config")
    p_run.add_argument("--solver", action="append", default=None,
                       metavar="NAME",
                       help="restrict to this solver (repeatable)")
    p_run.add_argument("--seeds", type=int, default=None,
                       help="override the number of seeds")
    p_run.add_argument("--out", default=None,
                       help="override the output directory")

    p_rep = sub.add_parser("report",
                           help="rebuild report artifacts for a run dir")
    p_rep.add_argument("runs_dir", help="experiment directory with runs")

    p_chain = sub.add_parser("chain",
                             help="run two experiments, warm-starting the "
                                  "second from the first")
    p_chain.add_argument("-c1", required=True, dest="c1",
                         help="config for the first experiment")
    p_chain.add_argument("-c2", required=True, dest="c2",
                         help="config for the second experiment")

    sub.add_parser("list-problems", help="print registered problem names")
    sub.add_parser("list-solvers", help="print runnable solver names")
    return parser


def _load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    raw = config.to_dict()
    if args.solver:
        raw["solvers"] = list(args.solver)
    if args.seeds is not None:
        raw["n_seeds"] = args.seeds
    if args.out is not None:
        raw["out_dir"] = args.out
    return ExperimentConfig.from_dict(raw)


def _cmd_run(args) -> int:
    config = _apply_overrides(_load_config(args.config), args)
    get_problem(config.problem)  # fail fast on unknown problems
    result = run_experiment(config)
    for failure in result.failures:
        print(f"FAILED {failure['solver']} seed {failure['seed']}: "
              f"{failure['error']}", file=sys.stderr)
    n_done = len(result.runs)
    print(f"{config.experiment_name}: {n_done} runs completed, "
          f"{len(result.failures)} failed; artifacts in {result.run_dir}")
    return EXIT_OK if result.ok else EXIT_RUN_FAILURE


def _cmd_report(args) -> int:
    report = report_run_dir(args.runs_dir)
    print(f"report rebuilt for {report.experiment}: solvers "
          f"{', '.join(report.solvers)}")
    return EXIT_OK


def _cmd_chain(args) -> int:
    first = _load_config(args.c1)
    second = _load_config(args.c2)
    res1, res2 = chain_experiments(first, second)
    for res in (res1, res2):
        for failure in res.failures:
            print(f"FAILED {failure['solver']} seed {failure['seed']}: "
                  f"{failure['error']}", file=sys.stderr)
    print(f"chained {first.experiment_name} -> {second.experiment_name}; "
          f"artifacts in {res1.run_dir} and {res2.run_dir}")
    return EXIT_OK if res1.ok and res2.ok else EXIT_RUN_FAILURE


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "chain":
            return _cmd_chain(args)
        if args.command == "list-problems":
            for name in problem_names():
                print(name)
            return EXIT_OK
        if args.command == "list-solvers":
            for name in solver_names():
                print(name)
            return EXIT_OK
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChainError as exc:
        print(f"chain error: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    except ReportError as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
