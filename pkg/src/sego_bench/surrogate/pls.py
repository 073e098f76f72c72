"""Partial-least-squares projection for high-dimensional kriging.

Implements the classic PLS1 weight-deflation iteration: each stage picks
the unit direction maximizing covariance between projected inputs and the
current output residual, then deflates both.  Only the raw stage weights
are kept; the kriging side consumes them as per-dimension mixing
coefficients.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class PlsProjection:
    """Projection weights W (d x h), columns unit norm."""

    components: int
    weights: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", W)
        if W.ndim != 2 or W.shape[1] != self.components:
            raise ConfigError(f"weights must be (d, {self.components}), got {W.shape}")


def pls_fit(X, y, h: int) -> PlsProjection:
    """Compute h PLS1 weight vectors for inputs X against output y.

    Zero-variance input columns receive zero weight (with a warning).  If a
    stage residual carries no covariance signal the direction falls back to
    the leading principal direction of the deflated inputs, keeping the
    weight matrix full rank on full-rank data.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if y.shape != (n,):
        raise ConfigError(f"y has shape {y.shape}, expected ({n},)")
    if not 1 <= h <= min(d, n - 1):
        raise ConfigError(
            f"h must satisfy 1 <= h <= min(d, n-1) = {min(d, n - 1)}, got {h}"
        )
    if np.any(np.std(X, axis=0) == 0.0):
        warnings.warn(
            "zero-variance input column; it receives zero PLS weight",
            stacklevel=2,
        )
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    W = np.zeros((d, h))
    for l in range(h):
        w = Xc.T @ yc
        nw = np.linalg.norm(w)
        if nw < 1e-12:
            # No covariance signal left: use the leading input direction.
            sing = np.linalg.svd(Xc, full_matrices=False)
            if sing[1][0] < 1e-12:
                w = np.zeros(d)
                w[l % d] = 1.0
            else:
                w = sing[2][0]
        else:
            w = w / nw
        t = Xc @ w
        tt = float(t @ t)
        if tt > 0:
            p = Xc.T @ t / tt
            Xc = Xc - np.outer(t, p)
            yc = yc - t * (float(t @ yc) / tt)
        W[:, l] = w
    return PlsProjection(components=h, weights=W)
