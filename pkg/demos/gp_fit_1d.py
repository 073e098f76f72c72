"""
Fitting a kriging surrogate to a handful of 1-D samples
=======================================================

Eight evaluations of a bumpy function are enough for the surrogate to
track it, and the predictive standard deviation shows where the model
is guessing.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from sego_bench import fit_gp, lhs_sample


def truth(x):
    return np.sin(6.0 * x) + 0.3 * np.cos(14.0 * x) + 0.5 * x


# training data: a small latin hypercube in [0, 1]
X = lhs_sample(8, 1, seed=3)
y = truth(X[:, 0])

grid = np.linspace(0.0, 1.0, 400).reshape(-1, 1)

fig, axes = plt.subplots(1, 2, figsize=(10, 3.6), sharey=True)
for ax, kernel in zip(axes, ("matern52", "squared-exponential")):
    model = fit_gp(X, y, kernel=kernel)
    mu, sigma = model.predict(grid)
    print(f"{kernel}: length-scale {model.theta.round(4)}, "
          f"process std {np.sqrt(model.process_variance):.3f}")

    ax.plot(grid, truth(grid[:, 0]), "k--", lw=1, label="truth")
    ax.plot(grid, mu, "C0", label="mean")
    ax.fill_between(grid[:, 0], mu - 2 * sigma, mu + 2 * sigma,
                    color="C0", alpha=0.2, label="mean +- 2 std")
    ax.plot(X[:, 0], y, "ko", ms=5)
    ax.set_title(kernel)
    ax.legend(loc="upper left", fontsize=8)

fig.tight_layout()
out = "demos/gp_fit_1d.svg"
fig.savefig(out)
print("figure written to", out)

# at the training points the surrogate interpolates
for kernel in ("matern52", "squared-exponential"):
    model = fit_gp(X, y, kernel=kernel)
    mu, _ = model.predict(X)
    print(f"{kernel}: worst training residual {np.abs(mu - y).max():.2e}")
