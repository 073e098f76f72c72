"""
What the three in-fill criteria actually reward
===============================================

The enrichment step picks the next evaluation by minimizing an
acquisition over the surrogate.  Plain expected improvement (EI) chases
uncertain regions; WB2 regularizes it with the predicted mean so the
argmin sits on smoother terrain; WB2S rescales the EI term so the mean
does not drown it when the objective is large.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from sego_bench import AcquisitionSpec, acquisition_values, compute_wb2s_scale, fit_gp

rng = np.random.default_rng(7)
X = np.sort(rng.random(6)).reshape(-1, 1)
y = np.sin(5.0 * X[:, 0]) * 20.0 + 30.0  # deliberately offset: mean ~ 30
model = fit_gp(X, y, kernel="matern52")
f_min = y.min()

grid = np.linspace(0.0, 1.0, 600).reshape(-1, 1)
mu, sigma = model.predict(grid)

# WB2S needs its scale anchored at the EI maximizer
ei = acquisition_values(AcquisitionSpec(kind="ei"), mu, sigma, f_min)
candidate = grid[np.argmin(ei)]
s = compute_wb2s_scale(model, f_min, candidate, beta=100.0)
print(f"f_min = {f_min:.3f}, WB2S scale s = {s:.1f}")

fig, axes = plt.subplots(4, 1, figsize=(7, 8), sharex=True)
axes[0].plot(grid, mu, "C0")
axes[0].fill_between(grid[:, 0], mu - 2 * sigma, mu + 2 * sigma,
                     color="C0", alpha=0.2)
axes[0].plot(X[:, 0], y, "ko", ms=4)
axes[0].set_ylabel("posterior")

for ax, kind in zip(axes[1:], ("ei", "wb2", "wb2s")):
    spec = AcquisitionSpec(kind=kind)
    vals = acquisition_values(spec, mu, sigma, f_min,
                              scale_state=s if kind == "wb2s" else None)
    best = np.argmin(vals)
    ax.plot(grid, vals, "C1")
    ax.axvline(grid[best, 0], color="C3", lw=1)
    ax.set_ylabel(kind)
    print(f"{kind:4s}: argmin at x = {grid[best, 0]:.3f}, "
          f"value {vals[best]:.4f}")

axes[-1].set_xlabel("x")
fig.tight_layout()
out = "demos/acquisition_tour.svg"
fig.savefig(out)
print("figure written to", out)
