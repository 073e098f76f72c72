"""Convergence and parallel-coordinates reporting over run traces.

Turns the per-run histories of one experiment into penalized best-valid
series, 0-1 scaled envelopes across seeds, a median run per solver, and
deterministic CSV/SVG artifacts.  Everything here is a pure function of
already-recorded data; nothing re-evaluates a problem.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ReportError
from .problems import EvaluationRecord, is_feasible, selection_key, total_violation

__all__ = [
    "RunArtifact",
    "ConvergenceReport",
    "best_valid_series",
    "experiment_penalty",
    "scale01",
    "median_run",
    "build_report",
    "emit_plots",
]

_TIME_GRID_POINTS = 129

# Stable per-solver line colors, assigned in sorted solver-name order.
_SOLVER_PALETTE = (
    "#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#ff7f0e", "#17becf",
    "#e377c2", "#7f7f7f",
)

_CLASS_COLORS = {
    "infeasible": "#1f77b4",  # blue
    "feasible": "#2ca02c",    # green
    "optimum": "#000000",     # black
    "reference": "#d62728",   # red
}


@dataclass
class RunArtifact:
    """One completed run: its records plus per-iteration trace rows."""

    solver: str
    seed: int
    records: List[EvaluationRecord]
    iteration_rows: List[dict] = field(default_factory=list)
    truncated: bool = False


def _records_of(trace) -> List[EvaluationRecord]:
    """Accept a RunTrace, a Dataset, a RunArtifact, or a plain record list."""
    if hasattr(trace, "dataset"):
        return list(trace.dataset.records)
    if hasattr(trace, "records"):
        return list(trace.records)
    return list(trace)


def best_valid_series(trace, penalty: float) -> np.ndarray:
    """Running best feasible objective, with ``penalty`` before the first.

    Entry k is the minimum feasible objective among records 0..k, or the
    penalty constant while no feasible record exists yet.
    """
    if not np.isfinite(penalty):
        raise ReportError("penalty must be finite")
    records = _records_of(trace)
    out = np.empty(len(records))
    best = np.inf
    for k, rec in enumerate(records):
        if is_feasible(rec) and rec.objective_value < best:
            best = rec.objective_value
        out[k] = best if np.isfinite(best) else penalty
    return out


def experiment_penalty(all_traces) -> float:
    """Highest feasible objective value found anywhere in the experiment."""
    worst = -np.inf
    for trace in all_traces:
        for rec in _records_of(trace):
            if is_feasible(rec) and rec.objective_value > worst:
                worst = rec.objective_value
    if not np.isfinite(worst):
        raise ReportError(
            "no feasible record in any run; increase the evaluation budget "
            "(or the DoE size) until at least one design is feasible")
    return float(worst)


def scale01(series_set: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Affinely map a set of series onto [0, 1] using shared extrema.

    The extrema are global over every series in the set, so relative
    order between series is preserved.  A degenerate set (all values
    equal) maps to constant 0.5 with a warning.
    """
    arrays = [np.asarray(s, dtype=float) for s in series_set]
    if not arrays or any(a.size == 0 for a in arrays):
        raise ReportError("scale01 requires non-empty series")
    lo = min(float(a.min()) for a in arrays)
    hi = max(float(a.max()) for a in arrays)
    if hi == lo:
        warnings.warn("degenerate series set (max == min); scaling to 0.5",
                      stacklevel=2)
        return [np.full_like(a, 0.5) for a in arrays]
    return [(a - lo) / (hi - lo) for a in arrays]


def _series_bounds(series_set: Sequence[np.ndarray]) -> Tuple[float, float]:
    lo = min(float(np.min(s)) for s in series_set)
    hi = max(float(np.max(s)) for s in series_set)
    return lo, hi


def _median_key(records: List[EvaluationRecord]) -> tuple:
    feasible = [r.objective_value for r in records if is_feasible(r)]
    if feasible:
        return (0, min(feasible))
    return (1, min(total_violation(r) for r in records))


def median_run(traces) -> int:
    """Seed of the median run under the feasible-first ranking.

    Each run is keyed by its best feasible objective, or by its minimal
    explored violation when it never reached feasibility; feasible runs
    always precede infeasible ones.  Returns the seed at sorted index
    floor(n/2), breaking key ties by seed.
    """
    traces = list(traces)
    if not traces:
        raise ReportError("median_run requires at least one trace")
    keyed = []
    for t in traces:
        seed = t.seed if hasattr(t, "seed") else t.dataset.seed
        keyed.append((_median_key(_records_of(t)), seed))
    keyed.sort()
    return keyed[len(keyed) // 2][1]


def _per_record_times(run: RunArtifact) -> np.ndarray:
    """Cumulative wall time with per-iteration fit/solve costs folded in."""
    walls = np.array([r.wall_time_s for r in run.records], dtype=float)
    iter_rows = [row for row in run.iteration_rows
                 if row.get("type") == "iteration"]
    n_pre = len(run.records) - len(iter_rows)
    for j, row in enumerate(iter_rows):
        idx = n_pre + j
        if 0 <= idx < walls.size:
            walls[idx] += float(row.get("fit_time_s", 0.0))
            walls[idx] += float(row.get("solve_time_s", 0.0))
    return np.cumsum(walls)


def _step_interp(grid: np.ndarray, times: np.ndarray, values: np.ndarray,
                 before: float) -> np.ndarray:
    """Value of the last record at or before each grid time."""
    idx = np.searchsorted(times, grid, side="right") - 1
    out = np.where(idx >= 0, values[np.clip(idx, 0, values.size - 1)], before)
    return out


@dataclass
class ConvergenceReport:
    """Aggregated penalized convergence data for one experiment."""

    experiment: str
    solvers: List[str]
    penalty: float
    min_val: float
    max_val: float
    # scaled penalized best-valid series, per solver per seed
    eval_series: Dict[str, Dict[int, np.ndarray]]
    time_series: Dict[str, Dict[int, Tuple[np.ndarray, np.ndarray]]]
    eval_mean: Dict[str, np.ndarray]
    eval_std: Dict[str, Optional[np.ndarray]]
    time_grid: np.ndarray
    time_mean: Dict[str, np.ndarray]
    time_std: Dict[str, Optional[np.ndarray]]
    median_seed: Dict[str, int]
    reference: EvaluationRecord
    runs: List[RunArtifact]
    time_budget_s: Optional[float] = None

    def scaled(self, value: float) -> float:
        if self.max_val == self.min_val:
            return 0.5
        return (value - self.min_val) / (self.max_val - self.min_val)

    def median_artifact(self, solver: str) -> RunArtifact:
        for run in self.runs:
            if run.solver == solver and run.seed == self.median_seed[solver]:
                return run
        raise ReportError(f"no run stored for solver {solver!r} median seed")


def build_report(experiment: str, runs: Sequence[RunArtifact],
                 time_budget_s: Optional[float] = None,
                 per_run_penalty: bool = False) -> ConvergenceReport:
    """Aggregate runs of one experiment into a ConvergenceReport.

    ``per_run_penalty`` switches the penalty constant from the shared
    experiment-wide value to each run's own worst feasible value (runs
    without any feasible record fall back to the shared value).
    """
    runs = list(runs)
    if not runs:
        raise ReportError("build_report requires at least one run")
    solvers = sorted({run.solver for run in runs})
    shared_penalty = experiment_penalty(runs)

    raw: Dict[str, Dict[int, np.ndarray]] = {s: {} for s in solvers}
    order: List[Tuple[str, int]] = []
    for run in runs:
        penalty = shared_penalty
        if per_run_penalty:
            feas = [r.objective_value for r in run.records if is_feasible(r)]
            if feas:
                penalty = max(feas)
        raw[run.solver][run.seed] = best_valid_series(run.records, penalty)
        order.append((run.solver, run.seed))

    flat = [raw[s][seed] for s, seed in order]
    lo, hi = _series_bounds(flat)
    scaled_flat = scale01(flat)
    eval_series: Dict[str, Dict[int, np.ndarray]] = {s: {} for s in solvers}
    for (s, seed), series in zip(order, scaled_flat):
        eval_series[s][seed] = series

    # Per-seed cumulative time axes carrying the same scaled values.
    time_series: Dict[str, Dict[int, Tuple[np.ndarray, np.ndarray]]] = {
        s: {} for s in solvers}
    max_time = 0.0
    for run in runs:
        times = _per_record_times(run)
        time_series[run.solver][run.seed] = (
            times, eval_series[run.solver][run.seed])
        max_time = max(max_time, float(times[-1]))

    penalty_scaled = 1.0 if hi == lo else (shared_penalty - lo) / (hi - lo)
    grid = np.linspace(0.0, max_time, _TIME_GRID_POINTS)
    eval_mean: Dict[str, np.ndarray] = {}
    eval_std: Dict[str, Optional[np.ndarray]] = {}
    time_mean: Dict[str, np.ndarray] = {}
    time_std: Dict[str, Optional[np.ndarray]] = {}
    median_seed: Dict[str, int] = {}
    for s in solvers:
        seeds = sorted(eval_series[s])
        stack = np.stack([eval_series[s][seed] for seed in seeds])
        eval_mean[s] = stack.mean(axis=0)
        eval_std[s] = stack.std(axis=0, ddof=1) if len(seeds) > 1 else None
        tstack = np.stack([
            _step_interp(grid, *time_series[s][seed], before=penalty_scaled)
            for seed in seeds])
        time_mean[s] = tstack.mean(axis=0)
        time_std[s] = tstack.std(axis=0, ddof=1) if len(seeds) > 1 else None
        median_seed[s] = median_run(
            [_SeedView(run.seed, run.records) for run in runs
             if run.solver == s])

    reference = None
    for run in runs:
        for rec in run.records:
            if is_feasible(rec):
                if reference is None or (rec.objective_value
                                         < reference.objective_value):
                    reference = rec

    return ConvergenceReport(
        experiment=experiment, solvers=solvers, penalty=shared_penalty,
        min_val=lo, max_val=hi, eval_series=eval_series,
        time_series=time_series, eval_mean=eval_mean, eval_std=eval_std,
        time_grid=grid, time_mean=time_mean, time_std=time_std,
        median_seed=median_seed, reference=reference, runs=runs,
        time_budget_s=time_budget_s)


class _SeedView:
    """Minimal trace view (seed + records) for median_run."""

    def __init__(self, seed: int, records):
        self.seed = seed
        self.records = records


# ---------------------------------------------------------------------------
# emission


def _fmt(value) -> str:
    return repr(float(value))


def _write_convergence_csv(path: Path, report: ConvergenceReport,
                           axis: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["solver", "series", "axis", "value"])
        for solver in report.solvers:
            if axis == "evals":
                for seed in sorted(report.eval_series[solver]):
                    series = report.eval_series[solver][seed]
                    for k, v in enumerate(series):
                        writer.writerow([solver, str(seed), str(k), _fmt(v)])
                for k, v in enumerate(report.eval_mean[solver]):
                    writer.writerow([solver, "mean", str(k), _fmt(v)])
                if report.eval_std[solver] is not None:
                    for k, v in enumerate(report.eval_std[solver]):
                        writer.writerow([solver, "std", str(k), _fmt(v)])
            else:
                for seed in sorted(report.time_series[solver]):
                    times, series = report.time_series[solver][seed]
                    for t, v in zip(times, series):
                        writer.writerow([solver, str(seed), _fmt(t), _fmt(v)])
                for t, v in zip(report.time_grid, report.time_mean[solver]):
                    writer.writerow([solver, "mean", _fmt(t), _fmt(v)])
                if report.time_std[solver] is not None:
                    for t, v in zip(report.time_grid,
                                    report.time_std[solver]):
                        writer.writerow([solver, "std", _fmt(t), _fmt(v)])


def _record_class(rec: EvaluationRecord, optimum_index: int) -> str:
    if rec.eval_index == optimum_index:
        return "optimum"
    return "feasible" if is_feasible(rec) else "infeasible"


def _write_parallel_csv(path: Path, report: ConvergenceReport,
                        solver: str) -> None:
    run = report.median_artifact(solver)
    d = len(run.records[0].x)
    opt = min(run.records, key=lambda r: (selection_key(r), r.eval_index))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["eval_index"] + [f"DV_{j}" for j in range(d)]
                        + ["objective_scaled", "violation", "class"])
        for rec in run.records:
            writer.writerow(
                [str(rec.eval_index)] + [_fmt(v) for v in rec.x]
                + [_fmt(report.scaled(rec.objective_value)),
                   _fmt(total_violation(rec)),
                   _record_class(rec, opt.eval_index)])
        ref = report.reference
        writer.writerow(
            ["-1"] + [_fmt(v) for v in ref.x]
            + [_fmt(report.scaled(ref.objective_value)),
               _fmt(total_violation(ref)), "reference"])


def _solver_color(report: ConvergenceReport, solver: str) -> str:
    idx = report.solvers.index(solver)
    return _SOLVER_PALETTE[idx % len(_SOLVER_PALETTE)]


def _save_svg(fig, path: Path) -> None:
    import matplotlib

    with matplotlib.rc_context({"svg.hashsalt": "sego-bench"}):
        fig.savefig(path, format="svg", metadata={"Date": None})


def _convergence_figure(report: ConvergenceReport, axis: str):
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.add_subplot(111)
    for solver in report.solvers:
        color = _solver_color(report, solver)
        if axis == "evals":
            mean = report.eval_mean[solver]
            x = np.arange(mean.size)
            std = report.eval_std[solver]
        else:
            mean = report.time_mean[solver]
            x = report.time_grid
            std = report.time_std[solver]
        ax.plot(x, mean, color=color, label=solver, linewidth=1.4)
        if std is not None:
            ax.fill_between(x, mean - std, mean + std, color=color,
                            alpha=0.18, linewidth=0)
    if axis == "time" and report.time_budget_s is not None:
        ax.axvline(report.time_budget_s, color="#d62728", linestyle="--",
                   linewidth=1.2)
    ax.set_xlabel("evaluations" if axis == "evals" else "wall time [s]")
    ax.set_ylabel("scaled penalized best valid objective")
    ax.set_title(report.experiment)
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="upper right", fontsize=8)
    return fig


def _parallel_figure(report: ConvergenceReport, solver: str):
    from matplotlib.figure import Figure

    run = report.median_artifact(solver)
    d = len(run.records[0].x)
    opt = min(run.records, key=lambda r: (selection_key(r), r.eval_index))
    fig = Figure(figsize=(7.0, 4.4))
    ax = fig.add_subplot(111)
    xs = np.arange(d)
    # Draw classes back to front so highlighted designs stay visible.
    for rec in run.records:
        if _record_class(rec, opt.eval_index) == "infeasible":
            ax.plot(xs, rec.x, color=_CLASS_COLORS["infeasible"], alpha=0.25,
                    linewidth=0.7)
    for rec in run.records:
        if _record_class(rec, opt.eval_index) == "feasible":
            ax.plot(xs, rec.x, color=_CLASS_COLORS["feasible"], alpha=0.45,
                    linewidth=0.8)
    ax.plot(xs, opt.x, color=_CLASS_COLORS["optimum"], linewidth=2.0,
            label="optimum")
    ax.plot(xs, report.reference.x, color=_CLASS_COLORS["reference"],
            linewidth=1.8, linestyle="--", label="reference")
    ax.set_xticks(xs)
    ax.set_xticklabels([f"DV_{j}" for j in range(d)], fontsize=7,
                       rotation=45)
    ax.set_ylim(-0.02, 1.02)
    ax.set_ylabel("normalized value")
    ax.set_title(f"{report.experiment}: {solver} (seed {run.seed})")
    ax.legend(loc="upper right", fontsize=8)
    return fig


def emit_plots(report: ConvergenceReport, out_dir) -> List[Path]:
    """Write the CSV and SVG artifact set; returns the written paths.

    Output is deterministic: repeated calls on the same report produce
    byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    path = out / "convergence_evals.csv"
    _write_convergence_csv(path, report, "evals")
    written.append(path)
    path = out / "convergence_time.csv"
    _write_convergence_csv(path, report, "time")
    written.append(path)
    for solver in report.solvers:
        path = out / f"parallel_{solver}.csv"
        _write_parallel_csv(path, report, solver)
        written.append(path)

    fig = _convergence_figure(report, "evals")
    path = out / "convergence_evals.svg"
    _save_svg(fig, path)
    written.append(path)
    fig = _convergence_figure(report, "time")
    path = out / "convergence_time.svg"
    _save_svg(fig, path)
    written.append(path)
    for solver in report.solvers:
        fig = _parallel_figure(report, solver)
        path = out / f"parallel_{solver}.svg"
        _save_svg(fig, path)
        written.append(path)
    return written
