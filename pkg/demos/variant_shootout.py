"""
Four surrogate variants against the evolution baseline
======================================================

One seed of the 12-variable, 8-constraint benchmark at a reduced budget
of 40 evaluations.  The evolution strategy gets 300 evaluations and
still trails the surrogate loops.
"""

import numpy as np

from sego_bench import (ExperimentConfig, best_valid_series,
                        experiment_penalty, run_experiment)

config = ExperimentConfig(
    problem="cmdo12",
    solvers=("sego", "sego-utb", "segomoe", "segomoe-utb", "evol"),
    n_seeds=1,
    budget_fixed=40,
    evol_max_evals=300,
    name="shootout",
    out_dir="demos/runs",
)
result = run_experiment(config, emit=False)
assert result.ok, result.failures

penalty = experiment_penalty([run.records for run in result.runs])
print(f"penalty for infeasible prefixes: {penalty:.2f}\n")
print(f"{'solver':<12s} {'evals':>6s} {'final best valid':>18s}")
for run in result.runs:
    series = best_valid_series(run.records, penalty)
    print(f"{run.solver:<12s} {len(run.records):>6d} {series[-1]:>18.4f}")

best = min(result.runs,
           key=lambda r: best_valid_series(r.records, penalty)[-1])
print(f"\nbest finisher: {best.solver}")
