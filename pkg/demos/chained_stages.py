"""
Warm-starting a second optimization stage from a first
======================================================

The chained protocol runs one experiment, takes its best feasible
design, maps it into the second problem's coordinates (shared leading
coordinates copied, new ones defaulting to mid-range), and injects it
as an extra evaluation right after the second stage's DoE.
"""

import numpy as np

from sego_bench import ExperimentConfig, chain_experiments, is_feasible

first = ExperimentConfig(
    problem="cmdo12", solvers=("sego",), n_seeds=1, budget_fixed=30,
    name="stage1", out_dir="demos/runs")
second = ExperimentConfig(
    problem="pmdo19", solvers=("sego",), n_seeds=1, budget_fixed=35,
    name="stage2", out_dir="demos/runs")

res1, res2 = chain_experiments(first, second)
assert res1.ok and res2.ok

feas1 = [r for run in res1.runs for r in run.records if is_feasible(r)]
best1 = min(feas1, key=lambda r: r.objective_value)
print(f"stage 1 best feasible objective: {best1.objective_value:.4f}")

# the injected record sits right after stage 2's 20-point DoE
records = res2.runs[0].records
warm = records[20]
print("warm start coordinates (first 12 shared, rest mid-range):")
print(np.round(warm.x, 4))
assert np.allclose(warm.x[:12], best1.x), "shared coordinates must carry over"
assert np.allclose(warm.x[12:], 0.5), "new coordinates default to 0.5"

feas2 = [r for r in records if is_feasible(r)]
print(f"stage 2: {len(records)} evaluations, "
      f"best feasible {min(r.objective_value for r in feas2):.4f}"
      if feas2 else "stage 2: no feasible point yet")
