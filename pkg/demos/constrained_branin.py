"""
Surrogate optimization of the disk-constrained Branin function
==============================================================

A 10-point DoE plus 30 enrichment steps.  Of Branin's three minimizers
only one lies inside the disk, and the loop finds it to five digits.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from sego_bench import (build_initial_doe, get_problem, is_feasible,
                        make_variant, sego_run)

problem = get_problem("branin-c")
doe = build_initial_doe(problem, 10, seed=0)
trace = sego_run(problem, make_variant("sego", max_nb_it=30, seed=0), doe)
records = trace.dataset.records

# best feasible value after each evaluation
best = np.inf
print(" eval   best feasible")
for i, rec in enumerate(records):
    if is_feasible(rec) and rec.objective_value < best:
        best = rec.objective_value
    if (i + 1) % 5 == 0:
        print(f"  {i + 1:3d}   {best:12.6f}")

opt = problem.known_optimum
print(f"known optimum {opt.value:.6f}; "
      f"gap {best - opt.value:.2e}")

# scatter the run over the objective contours and the disk boundary
g1, g2 = np.meshgrid(np.linspace(0, 1, 160), np.linspace(0, 1, 160))
P = np.column_stack([g1.ravel(), g2.ravel()])
raw = problem.lower_bounds + P * (problem.upper_bounds - problem.lower_bounds)
F = np.array([problem.objective(p) for p in raw]).reshape(g1.shape)

X = np.array([r.x for r in records])
feas = np.array([is_feasible(r) for r in records])

fig, ax = plt.subplots(figsize=(5.5, 5))
ax.contourf(g1, g2, np.log10(F), levels=25, cmap="viridis", alpha=0.75)
angle = np.linspace(0, 2 * np.pi, 200)
# disk in problem coordinates, drawn back in the unit square
cx, cy, r = 2.5, 7.5, np.sqrt(50.0)
bx = (cx + r * np.cos(angle) - problem.lower_bounds[0]) / 15.0
by = (cy + r * np.sin(angle) - problem.lower_bounds[1]) / 15.0
ax.plot(bx, by, "w-", lw=1.5)
ax.plot(X[feas, 0], X[feas, 1], "o", color="C0", ms=5, label="feasible")
ax.plot(X[~feas, 0], X[~feas, 1], "x", color="C3", ms=6, label="infeasible")
xn = (opt.point - problem.lower_bounds) / (problem.upper_bounds - problem.lower_bounds)
ax.plot(*xn, "y*", ms=16, label="optimum")
ax.set_xlim(0, 1), ax.set_ylim(0, 1)
ax.legend(loc="upper right", fontsize=8)
fig.tight_layout()
out = "demos/constrained_branin.svg"
fig.savefig(out)
print("figure written to", out)
