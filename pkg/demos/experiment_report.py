"""
Running a small benchmark grid and emitting the report
======================================================

Three seeds of the constrained 2-D problem, two solvers.  Every solver
within a seed starts from the same DoE, and the report directory ends
up with convergence curves (vs evaluations and vs wall time) plus one
parallel-coordinates sheet per solver.
"""

from pathlib import Path

from sego_bench import ExperimentConfig, run_experiment

config = ExperimentConfig(
    problem="branin-c",
    solvers=("sego", "evol"),
    n_seeds=3,
    doe_rule=10,
    budget_fixed=25,
    evol_max_evals=60,
    name="demo-report",
    out_dir="demos/runs",
)
result = run_experiment(config)          # emit=True writes the report
assert result.ok, result.failures

run_dir = Path(config.out_dir) / config.experiment_name
print("run directory:", run_dir)
for sub in sorted(run_dir.rglob("*")):
    if sub.is_file():
        print("  ", sub.relative_to(run_dir), f"({sub.stat().st_size} bytes)")

print()
for run in sorted(result.runs, key=lambda r: (r.seed, r.solver)):
    final = run.records[-1]
    print(f"seed {run.seed} {run.solver:<6s}: {len(run.records)} evaluations, "
          f"last objective {final.objective_value:.4f}")
