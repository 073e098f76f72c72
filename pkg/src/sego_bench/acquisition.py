"""Acquisition functions and feasibility criteria for the in-fill sub-problem.

All acquisitions are minimization targets: expected improvement enters as
-EI, the regularized variants as mean - (scaled) EI.  Feasibility criteria
return per-constraint margins; a point is acceptable when every margin is
nonnegative.  The upper-trust-bound criterion widens the margins by a
multiple of the predictive uncertainty that decays exponentially over
iterations, so early iterations explore uncertain regions and late ones
trust the constraint means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError

# EI below this is treated as zero when scaling the regularized acquisition.
EI_SCALE_FLOOR = 1e-16

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class AcquisitionSpec:
    """Which in-fill criterion to minimize over the objective surrogate."""

    kind: str = "wb2s"  # "ei", "wb2" or "wb2s"
    wb2s_beta: float = 100.0

    def __post_init__(self):
        if self.kind not in ("ei", "wb2", "wb2s"):
            raise ConfigError(f"unknown acquisition kind {self.kind!r}")
        if self.wb2s_beta <= 0:
            raise ConfigError(f"wb2s_beta must be > 0, got {self.wb2s_beta}")


@dataclass(frozen=True)
class FeasibilitySpec:
    """How constraint surrogates define the acceptable region."""

    kind: str = "mean"  # "mean" or "utb"
    tau0: float = 3.0
    decay: str = "exponential"
    tau_end_fraction: float = 0.01
    horizon: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("mean", "utb"):
            raise ConfigError(f"unknown feasibility kind {self.kind!r}")
        if self.tau0 < 0:
            raise ConfigError(f"tau0 must be >= 0, got {self.tau0}")
        if self.decay != "exponential":
            raise ConfigError(f"unknown decay {self.decay!r}")
        if not 0.0 < self.tau_end_fraction <= 1.0:
            raise ConfigError(
                f"tau_end_fraction must be in (0, 1], got {self.tau_end_fraction}"
            )


def expected_improvement(mu, sigma, f_min):
    """Expected improvement below f_min for a normal posterior.

    Vectorized over broadcastable mu and sigma.  Zero predictive
    uncertainty yields zero improvement by convention.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    out = np.zeros(np.broadcast(mu, sigma).shape)
    pos = sigma > 0
    if np.any(pos):
        mu_p = np.broadcast_to(mu, out.shape)[pos]
        s_p = np.broadcast_to(sigma, out.shape)[pos]
        u = (f_min - mu_p) / s_p
        phi = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
        out[pos] = (f_min - mu_p) * ndtr(u) + s_p * phi
    out = np.maximum(out, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def expected_improvement_grad(mu, sigma, f_min):
    """Partial derivatives of EI with respect to mu and sigma.

    dEI/dmu = -Phi(u), dEI/dsigma = phi(u) with u = (f_min - mu) / sigma;
    both are zero where sigma is zero.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    shape = np.broadcast(mu, sigma).shape
    dmu = np.zeros(shape)
    dsig = np.zeros(shape)
    pos = sigma > 0
    if np.any(pos):
        mu_p = np.broadcast_to(mu, shape)[pos]
        s_p = np.broadcast_to(sigma, shape)[pos]
        u = (f_min - mu_p) / s_p
        dmu[pos] = -ndtr(u)
        dsig[pos] = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    return dmu, dsig


def acquisition_values(
    spec: AcquisitionSpec, mu, sigma, f_min: float, scale_state: Optional[float] = None
):
    """Vectorized acquisition value (to minimize) from posterior moments."""
    ei = expected_improvement(mu, sigma, f_min)
    if spec.kind == "ei":
        return -ei
    s = 1.0 if spec.kind == "wb2" else _scale_or_one(scale_state)
    return np.asarray(mu, dtype=float) - s * ei


def acquisition_value(
    spec: AcquisitionSpec, model, x, f_min: float, scale_state: Optional[float] = None
) -> float:
    """Acquisition value at a single point of a trained surrogate."""
    mu, sigma = model.predict(np.atleast_2d(np.asarray(x, dtype=float)))
    val = acquisition_values(spec, mu, sigma, f_min, scale_state)
    return float(np.asarray(val).ravel()[0])


def _scale_or_one(scale_state: Optional[float]) -> float:
    return 1.0 if scale_state is None else float(scale_state)


def compute_wb2s_scale(model, f_min: float, ei_argmax_candidate, beta: float) -> float:
    """Scale factor for the regularized acquisition.

    Evaluated at the preliminary EI maximizer: s = beta |mu| / EI, with a
    fallback of 1 when the best available EI is numerically zero.
    """
    x = np.atleast_2d(np.asarray(ei_argmax_candidate, dtype=float))
    mu, sigma = model.predict(x)
    ei = expected_improvement(float(mu[0]), float(sigma[0]), f_min)
    if ei <= EI_SCALE_FLOOR:
        return 1.0
    return float(beta) * abs(float(mu[0])) / float(ei)


def utb_tau(spec: FeasibilitySpec, l: int) -> float:
    """Trust-bound multiplier at iteration l of the exponential schedule.

    tau(l) = tau0 exp(-gamma l) with gamma chosen so that tau reaches
    tau0 * tau_end_fraction at the horizon.  A zero or missing horizon
    degenerates to the constant floor value.
    """
    if l < 0:
        raise ConfigError(f"iteration index must be >= 0, got {l}")
    horizon = spec.horizon
    if horizon is None or horizon <= 0:
        return spec.tau0 * spec.tau_end_fraction
    gamma = math.log(1.0 / spec.tau_end_fraction) / horizon
    return spec.tau0 * math.exp(-gamma * l)


def feasibility_margins(
    spec: FeasibilitySpec, constraint_models, Xq: np.ndarray, l: int
) -> np.ndarray:
    """Margins of all constraints at query points, shape (p, m).

    Mean feasibility uses the constraint means alone; the trust-bound
    variant adds tau(l) times the predictive standard deviation.  A point
    is margin-feasible when all entries are >= 0.  With no constraints the
    result is empty and every point is feasible.
    """
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    p = Xq.shape[0]
    m = len(constraint_models)
    out = np.empty((p, m))
    need_sigma = spec.kind == "utb"
    tau = utb_tau(spec, l) if need_sigma else 0.0
    for i, model in enumerate(constraint_models):
        mu, sigma = model.predict(Xq, need_sigma=need_sigma)
        out[:, i] = mu + tau * sigma if need_sigma else mu
    return out


def feasibility_margin(
    spec: FeasibilitySpec, constraint_models, x, l: int
) -> np.ndarray:
    """Margins at a single point, shape (m,)."""
    return feasibility_margins(
        spec, constraint_models, np.atleast_2d(np.asarray(x, dtype=float)), l
    )[0]
