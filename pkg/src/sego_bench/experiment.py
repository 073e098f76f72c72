"""Experiment orchestration: shared DoEs, run persistence, reporting.

An experiment is a (problem, solver list, seed count) grid.  Every
solver of a seed starts from the same Latin hypercube design; the
evolutionary baseline additionally collapses that design to its best
valid point as search parent.  Runs persist under
``out_dir/<experiment>/<solver>/<seed>/`` as a history and a trace file,
and the report artifacts land in ``out_dir/<experiment>/report/``.
"""

from __future__ import annotations

import hashlib
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._jsonio import canonical_dumps, read_jsonl
from .doe import (
    Dataset,
    build_initial_doe,
    doe_size,
    incumbent,
    inject_warm_start,
    load_history,
    record_to_row,
    save_history,
)
from .errors import ChainError, ConfigError, ReportError
from .evol import EvolConfig, evol_run
from .problems import OptimizationProblem, get_problem
from .reporting import ConvergenceReport, RunArtifact, build_report, emit_plots
from .sego import RunTrace, load_trace, make_variant, sego_run, save_trace

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "run_experiment",
    "chain_experiments",
    "load_run_dir",
    "report_run_dir",
    "solver_names",
    "JOBS_ENV_VAR",
]

JOBS_ENV_VAR = "SEGO_BENCH_JOBS"

_SEGO_SOLVERS = ("sego", "sego-utb", "segomoe", "segomoe-utb")


def solver_names() -> List[str]:
    """All runnable solver names."""
    return list(_SEGO_SOLVERS) + ["evol"]


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment grid."""

    problem: str
    solvers: Tuple[str, ...] = _SEGO_SOLVERS + ("evol",)
    name: Optional[str] = None
    n_seeds: int = 10
    doe_rule: object = "d+1"
    budget_mult_of_dim: Optional[int] = None
    budget_fixed: Optional[int] = None
    evol_max_evals: int = 100
    evol_batch_size: int = 1
    warm_start: Optional[Tuple[float, ...]] = None
    out_dir: str = "runs"
    max_run_seconds: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be at least 1")
        if not self.solvers:
            raise ConfigError("solver list must not be empty")
        bad = [s for s in self.solvers if s not in solver_names()]
        if bad:
            raise ConfigError(
                f"unknown solvers {bad}; valid names: {solver_names()}")
        if (self.budget_mult_of_dim is None) == (self.budget_fixed is None):
            raise ConfigError(
                "exactly one of budget_mult_of_dim / budget_fixed is required")
        if self.budget_mult_of_dim is not None \
                and self.budget_mult_of_dim not in (10, 20):
            raise ConfigError("budget_mult_of_dim must be 10 or 20")
        if self.budget_fixed is not None and self.budget_fixed < 2:
            raise ConfigError("budget_fixed must be at least 2")
        if self.evol_max_evals < 1:
            raise ConfigError("evol_max_evals must be at least 1")
        if self.evol_batch_size < 1:
            raise ConfigError("evol_batch_size must be at least 1")
        if self.max_run_seconds is not None and self.max_run_seconds <= 0:
            raise ConfigError("max_run_seconds must be positive")

    @property
    def experiment_name(self) -> str:
        return self.name or self.problem

    def resolved_budget(self, dimension: int) -> int:
        if self.budget_fixed is not None:
            return self.budget_fixed
        return self.budget_mult_of_dim * dimension

    def doe_points(self, dimension: int) -> int:
        return doe_size(dimension, self.doe_rule)

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        """Build from a JSON-shaped dict (the CLI config format)."""
        if not isinstance(raw, dict):
            raise ConfigError("experiment config must be a JSON object")
        known = {
            "name", "problem", "solvers", "n_seeds", "doe", "budget", "evol",
            "warm_start", "out_dir", "max_run_seconds",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "problem" not in raw:
            raise ConfigError("config requires a 'problem' key")
        kwargs: dict = {"problem": raw["problem"]}
        if "name" in raw:
            kwargs["name"] = raw["name"]
        if "solvers" in raw:
            kwargs["solvers"] = tuple(raw["solvers"])
        if "n_seeds" in raw:
            kwargs["n_seeds"] = int(raw["n_seeds"])
        if "doe" in raw:
            kwargs["doe_rule"] = raw["doe"]
        budget = raw.get("budget")
        if budget is None:
            raise ConfigError("config requires a 'budget' object")
        if not isinstance(budget, dict) or len(budget) != 1:
            raise ConfigError(
                "budget must be {'mult_of_dim': k} or {'fixed': n}")
        if "mult_of_dim" in budget:
            kwargs["budget_mult_of_dim"] = int(budget["mult_of_dim"])
        elif "fixed" in budget:
            kwargs["budget_fixed"] = int(budget["fixed"])
        else:
            raise ConfigError(
                "budget must be {'mult_of_dim': k} or {'fixed': n}")
        evol = raw.get("evol", {})
        if not isinstance(evol, dict):
            raise ConfigError("'evol' must be an object")
        if "max_evals" in evol:
            kwargs["evol_max_evals"] = int(evol["max_evals"])
        if "batch_size" in evol:
            kwargs["evol_batch_size"] = int(evol["batch_size"])
        if raw.get("warm_start") is not None:
            kwargs["warm_start"] = tuple(float(v) for v in raw["warm_start"])
        if "out_dir" in raw:
            kwargs["out_dir"] = raw["out_dir"]
        if raw.get("max_run_seconds") is not None:
            kwargs["max_run_seconds"] = float(raw["max_run_seconds"])
        return ExperimentConfig(**kwargs)

    def to_dict(self) -> dict:
        """Inverse of from_dict: the JSON config schema."""
        budget = ({"fixed": self.budget_fixed}
                  if self.budget_fixed is not None
                  else {"mult_of_dim": self.budget_mult_of_dim})
        return {
            "name": self.name,
            "problem": self.problem,
            "solvers": list(self.solvers),
            "n_seeds": self.n_seeds,
            "doe": self.doe_rule,
            "budget": budget,
            "evol": {"max_evals": self.evol_max_evals,
                     "batch_size": self.evol_batch_size},
            "warm_start": (list(self.warm_start)
                           if self.warm_start is not None else None),
            "out_dir": self.out_dir,
            "max_run_seconds": self.max_run_seconds,
        }


@dataclass
class ExperimentResult:
    """Outcome of run_experiment: the report plus a failure manifest."""

    config: ExperimentConfig
    report: Optional[ConvergenceReport]
    runs: List[RunArtifact]
    failures: List[dict]
    run_dir: Path
    doe_hashes: Dict[int, Dict[str, str]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def _initial_design(problem: OptimizationProblem, config: ExperimentConfig,
                    seed: int) -> Dataset:
    ds = build_initial_doe(problem, config.doe_points(problem.dimension), seed)
    if config.warm_start is not None:
        if len(config.warm_start) != problem.dimension:
            raise ConfigError(
                f"warm_start has {len(config.warm_start)} coordinates, "
                f"problem {problem.name} needs {problem.dimension}")
        ds = inject_warm_start(ds, np.asarray(config.warm_start), problem)
    return ds


def _doe_hash(ds: Dataset, n_initial: int) -> str:
    digest = hashlib.sha256()
    for rec in ds.records[:n_initial]:
        digest.update(canonical_dumps(record_to_row(rec)).encode())
        digest.update(b"\n")
    return digest.hexdigest()


def _run_one(problem: OptimizationProblem, config: ExperimentConfig,
             solver: str, seed: int) -> RunTrace:
    initial = _initial_design(problem, config, seed)
    budget = config.resolved_budget(problem.dimension)
    n_doe = config.doe_points(problem.dimension)
    if budget < n_doe + 1:
        raise ConfigError(
            f"budget {budget} must exceed the DoE size {n_doe}")
    if solver == "evol":
        evol_cfg = EvolConfig(
            max_evals=config.evol_max_evals,
            batch_size=config.evol_batch_size, seed=seed)
        return evol_run(problem, evol_cfg, incumbent(initial),
                        history=initial, deadline_s=config.max_run_seconds)
    solver_cfg = make_variant(solver, max_nb_it=budget - n_doe, seed=seed)
    return sego_run(problem, solver_cfg, initial,
                    deadline_s=config.max_run_seconds)


def _job(payload: dict) -> dict:
    """Executable in a worker process: run one (solver, seed) and persist."""
    config = ExperimentConfig.from_dict(payload["config"])
    problem = get_problem(config.problem)
    solver = payload["solver"]
    seed = payload["seed"]
    run_dir = Path(payload["run_dir"]) / solver / str(seed)
    run_dir.mkdir(parents=True, exist_ok=True)
    trace = _run_one(problem, config, solver, seed)
    save_history(trace.dataset, run_dir / "history.jsonl")
    save_trace(trace, run_dir / "trace.jsonl")
    n_initial = config.doe_points(problem.dimension)
    if config.warm_start is not None:
        n_initial += 1
    return {
        "solver": solver,
        "seed": seed,
        "n_records": len(trace.dataset.records),
        "truncated": trace.truncated,
        "doe_hash": _doe_hash(trace.dataset, n_initial),
    }


def _job_count() -> int:
    raw = os.environ.get(JOBS_ENV_VAR, "1")
    try:
        jobs = int(raw)
    except ValueError:
        raise ConfigError(f"{JOBS_ENV_VAR} must be an integer, got {raw!r}")
    if jobs < 1:
        raise ConfigError(f"{JOBS_ENV_VAR} must be >= 1, got {jobs}")
    return jobs


def run_experiment(config: ExperimentConfig,
                   emit: bool = True) -> ExperimentResult:
    """Run the full grid, persist runs, and build the report.

    Jobs run sequentially unless the ``SEGO_BENCH_JOBS`` environment
    variable asks for a process pool.  Failed jobs are recorded in the
    manifest and the report is built from the completed remainder.
    """
    problem = get_problem(config.problem)
    run_dir = Path(config.out_dir) / config.experiment_name
    run_dir.mkdir(parents=True, exist_ok=True)

    payloads = [
        {"config": config.to_dict(), "solver": solver, "seed": seed,
         "run_dir": str(run_dir)}
        for seed in range(config.n_seeds) for solver in config.solvers
    ]
    outcomes: List[dict] = []
    failures: List[dict] = []
    jobs = _job_count()
    if jobs == 1:
        for payload in payloads:
            try:
                outcomes.append(_job(payload))
            except Exception as exc:
                failures.append({
                    "solver": payload["solver"], "seed": payload["seed"],
                    "error": f"{type(exc).__name__}: {exc}",
                    "traceback": traceback.format_exc(),
                })
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_job, p): p for p in payloads}
            for future, payload in futures.items():
                try:
                    outcomes.append(future.result())
                except Exception as exc:
                    failures.append({
                        "solver": payload["solver"], "seed": payload["seed"],
                        "error": f"{type(exc).__name__}: {exc}",
                    })

    doe_hashes: Dict[int, Dict[str, str]] = {}
    for outcome in outcomes:
        doe_hashes.setdefault(outcome["seed"], {})[outcome["solver"]] = (
            outcome["doe_hash"])
    shared_ok = all(len(set(h.values())) == 1 for h in doe_hashes.values())

    runs = load_run_dir(run_dir,
                        expected=[(o["solver"], o["seed"]) for o in outcomes])
    report: Optional[ConvergenceReport] = None
    report_error: Optional[str] = None
    if runs:
        try:
            report = build_report(config.experiment_name, runs,
                                  time_budget_s=config.max_run_seconds)
        except ReportError as exc:
            report_error = str(exc)

    report_dir = run_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "experiment": config.experiment_name,
        "config": config.to_dict(),
        "completed": [
            {k: o[k] for k in ("solver", "seed", "n_records", "truncated")}
            for o in sorted(outcomes,
                            key=lambda o: (o["seed"], o["solver"]))],
        "failures": [
            {k: f[k] for k in ("solver", "seed", "error")}
            for f in failures],
        "doe_hashes": {str(s): doe_hashes[s] for s in sorted(doe_hashes)},
        "doe_shared_ok": shared_ok,
        "report_error": report_error,
    }
    with open(report_dir / "manifest.json", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(canonical_dumps(manifest))
        fh.write("\n")
    if report is not None and emit:
        emit_plots(report, report_dir)

    return ExperimentResult(config=config, report=report, runs=runs,
                            failures=failures, run_dir=run_dir,
                            doe_hashes=doe_hashes)


def load_run_dir(run_dir, expected: Optional[Sequence[Tuple[str, int]]] = None
                 ) -> List[RunArtifact]:
    """Read persisted runs back as report inputs.

    Without ``expected``, every ``<solver>/<seed>/history.jsonl`` found
    under the directory is loaded (the external-trace import path).
    """
    run_dir = Path(run_dir)
    artifacts: List[RunArtifact] = []
    if expected is None:
        found = []
        for hist in sorted(run_dir.glob("*/*/history.jsonl")):
            solver = hist.parent.parent.name
            if solver == "report":
                continue
            try:
                seed = int(hist.parent.name)
            except ValueError:
                continue
            found.append((solver, seed))
        expected = found
    for solver, seed in expected:
        base = run_dir / solver / str(seed)
        ds = load_history(base / "history.jsonl", seed=seed)
        rows: List[dict] = []
        truncated = False
        trace_path = base / "trace.jsonl"
        if trace_path.exists():
            loaded = load_trace(trace_path)
            for row in loaded:
                if row.get("type") == "config":
                    truncated = bool(row.get("truncated", False))
                else:
                    rows.append(row)
        artifacts.append(RunArtifact(solver=solver, seed=seed,
                                     records=list(ds.records),
                                     iteration_rows=rows,
                                     truncated=truncated))
    return artifacts


def report_run_dir(run_dir) -> ConvergenceReport:
    """Rebuild and re-emit the report for an existing run directory."""
    run_dir = Path(run_dir)
    runs = load_run_dir(run_dir)
    if not runs:
        raise ReportError(f"no runs found under {run_dir}")
    report = build_report(run_dir.name, runs)
    emit_plots(report, run_dir / "report")
    return report


def _map_warm_start(x_first: Sequence[float], dim_second: int
                    ) -> Tuple[float, ...]:
    """Identity on shared normalized coordinates, 0.5 on new ones."""
    x_first = list(x_first)
    return tuple(
        float(x_first[j]) if j < len(x_first) else 0.5
        for j in range(dim_second))


def chain_experiments(first: ExperimentConfig, second: ExperimentConfig
                      ) -> Tuple[ExperimentResult, ExperimentResult]:
    """Run two experiments, warm-starting the second from the first.

    The best feasible design across all of the first experiment's runs
    is mapped into the second problem's normalized space.  An explicit
    warm start on the second config takes precedence over the chain.
    """
    result_first = run_experiment(first)
    if second.warm_start is None:
        if result_first.report is None:
            raise ChainError(
                "first experiment produced no feasible design; cannot chain "
                "(increase its budget or seeds)")
        ref = result_first.report.reference
        dim_second = get_problem(second.problem).dimension
        raw = second.to_dict()
        raw["warm_start"] = list(_map_warm_start(ref.x, dim_second))
        second = ExperimentConfig.from_dict(raw)
    result_second = run_experiment(second)
    return result_first, result_second
