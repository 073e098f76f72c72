"""Ordinary kriging with anisotropic kernels and MLE hyperparameter fitting.

Model
-----
Given training inputs ``X`` (n x d, in [0, 1]^d) and outputs ``y``, the
outputs are standardized to zero mean and unit variance and modeled as a
Gaussian process with constant trend ``beta`` and stationary correlation

    k(a, b) = psi(rho),    rho^2 = sum_j lam_j (a_j - b_j)^2,

where ``lam_j = 1 / theta_j^2`` are inverse squared length-scales and
``psi`` is either the squared-exponential ``exp(-rho^2 / 2)`` or the
Matern 5/2 correlation ``(1 + sqrt5 rho + 5 rho^2 / 3) exp(-sqrt5 rho)``.

Hyperparameters maximize the concentrated log marginal likelihood

    NLL(theta) = n log sigma2_hat + log det R,

with the trend solved in closed form by generalized least squares and the
process variance concentrated out as ``sigma2_hat = r' R^-1 r / n``.  The
search runs multi-start L-BFGS-B in log theta with analytic gradients.

Partial-least-squares reduction replaces the per-dimension weights by
``lam_j = sum_l W[j, l]^2 lam_l`` for h < d projected length-scales, which
reduces exactly to the full anisotropic model when h = d and W = I.

The predictive variance uses the stationary form

    s^2(x) = sigma2 (1 + eta - ktilde' R^-1 ktilde),

which reverts to the process variance far from the data and collapses to
the nugget scale at training points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg as sla
from scipy.optimize import minimize

from ..errors import ConfigError, FitError

SQRT5 = math.sqrt(5.0)

# Length-scale search box in normalized input units.
THETA_MIN = 1e-2
THETA_MAX = 1e2

# Nugget escalation ladder: start tiny, multiply by 10 on factorization
# failure, give up past 1e-4.
NUGGET_START = 1e-10
NUGGET_MAX = 1e-4

_Y_STD_FLOOR = 1e-12


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _correlation(kernel: str, rho2: np.ndarray) -> np.ndarray:
    """Correlation value from squared scaled distance."""
    if kernel == "squared-exponential":
        return np.exp(-0.5 * rho2)
    if kernel == "matern52":
        rho = np.sqrt(rho2)
        return (1.0 + SQRT5 * rho + (5.0 / 3.0) * rho2) * np.exp(-SQRT5 * rho)
    raise ConfigError(f"unknown kernel {kernel!r}")


def _matern52_dpsi_drho2(rho2: np.ndarray) -> np.ndarray:
    """d psi / d(rho^2) for the Matern 5/2 correlation.

    Using d psi / d rho = -(5/3) rho (1 + sqrt5 rho) exp(-sqrt5 rho) and
    d rho / d rho2 = 1 / (2 rho), the rho in the numerator cancels, so the
    expression stays finite at rho = 0.
    """
    rho = np.sqrt(rho2)
    return -(5.0 / 6.0) * (1.0 + SQRT5 * rho) * np.exp(-SQRT5 * rho)


def _sq_dist_stack(X: np.ndarray, weights: Optional[np.ndarray]) -> np.ndarray:
    """Per-component squared-difference stack, shape (q, n, n).

    Without weights, slice j holds (X[a, j] - X[b, j])^2.  With a (d, h)
    weight matrix, slice l holds sum_j W[j, l]^2 (X[a, j] - X[b, j])^2, so
    the same likelihood code serves both the full and the projected model.
    """
    n, d = X.shape
    diff = X[:, None, :] - X[None, :, :]
    d2 = diff * diff
    if weights is None:
        return np.ascontiguousarray(np.moveaxis(d2, 2, 0))
    return np.einsum("abj,jl->lab", d2, weights * weights)


@dataclass
class GaussianProcessModel:
    """A trained kriging model; immutable after fitting.

    ``theta`` lives in the q-dimensional fit space (q = d, or q = h under
    the PLS reduction); ``lam_eff`` is the equivalent per-input-dimension
    weight vector used for prediction.
    """

    kernel: str
    theta: np.ndarray
    process_variance: float
    trend: float
    nugget: float
    X: np.ndarray
    y: np.ndarray
    pls_weights: Optional[np.ndarray] = None
    is_constant: bool = False
    nll: float = math.nan
    # factorized state, standardized output scale
    _lam_eff: np.ndarray = field(default=None, repr=False)
    _L: np.ndarray = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)
    _beta: float = field(default=0.0, repr=False)
    _sigma2: float = field(default=0.0, repr=False)
    _y_mean: float = field(default=0.0, repr=False)
    _y_std: float = field(default=1.0, repr=False)

    @property
    def dimension(self) -> int:
        return self.X.shape[1]

    def _cross_correlation(self, Xq: np.ndarray) -> np.ndarray:
        """Correlation between query points and training points, (p, n).

        Expanded-square form: rho2 = |a|^2 + |b|^2 - 2 a.b in the lam
        metric, which is one GEMM instead of a (p, n, d) temporary.
        Rounding can leave tiny negatives on near-coincident points, so
        the result is clipped at zero.
        """
        lam = self._lam_eff
        sq_q = (Xq * Xq) @ lam
        sq_x = (self.X * self.X) @ lam
        rho2 = sq_q[:, None] + sq_x[None, :] - 2.0 * ((Xq * lam) @ self.X.T)
        np.maximum(rho2, 0.0, out=rho2)
        return _correlation(self.kernel, rho2)

    def predict_core(self, Xq: np.ndarray, need_var: bool = True):
        """Mean and variance (physical scale) at query points, (p,) each.

        ``need_var=False`` skips the back-solve against the Cholesky factor,
        which dominates the cost of batched prediction.
        """
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        p = Xq.shape[0]
        if self.is_constant:
            mu = np.full(p, self._y_mean)
            return (mu, np.zeros(p)) if need_var else (mu, None)
        K = self._cross_correlation(Xq)
        mu = self._y_mean + self._y_std * (self._beta + K @ self._alpha)
        if not need_var:
            return mu, None
        V = sla.solve_triangular(self._L, K.T, lower=True)
        var = (
            self._y_std ** 2
            * self._sigma2
            * (1.0 + self.nugget - np.einsum("np,np->p", V, V))
        )
        return mu, np.maximum(var, 0.0)

    def predict(self, Xq: np.ndarray, need_sigma: bool = True):
        """Mean and standard deviation at query points."""
        mu, var = self.predict_core(Xq, need_var=need_sigma)
        if not need_sigma:
            return mu, None
        return mu, np.sqrt(var)

    def predict_with_grad(self, Xq: np.ndarray):
        """Mean, variance and their gradients at query points.

        Returns ``(mu, var, dmu, dvar)`` with shapes (p,), (p,), (p, d),
        (p, d).  Gradients are analytic; the variance gradient reuses the
        same triangular back-solve as the variance itself.
        """
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        p, d = Xq.shape
        if self.is_constant:
            return (
                np.full(p, self._y_mean),
                np.zeros(p),
                np.zeros((p, d)),
                np.zeros((p, d)),
            )
        diff = Xq[:, None, :] - self.X[None, :, :]
        rho2 = np.einsum("pnj,j->pn", diff * diff, self._lam_eff)
        K = _correlation(self.kernel, rho2)
        # dK[p, n, j] = d psi / d x_j at query p against training point n
        if self.kernel == "squared-exponential":
            coef = -K
        else:
            coef = 2.0 * _matern52_dpsi_drho2(rho2)
        dK = coef[:, :, None] * diff * self._lam_eff[None, None, :]
        mu = self._y_mean + self._y_std * (self._beta + K @ self._alpha)
        dmu = self._y_std * np.einsum("pnj,n->pj", dK, self._alpha)
        V = sla.solve_triangular(self._L, K.T, lower=True)  # (n, p)
        var = (
            self._y_std ** 2
            * self._sigma2
            * (1.0 + self.nugget - np.einsum("np,np->p", V, V))
        )
        var = np.maximum(var, 0.0)
        # d var = -2 sigma2 (R^-1 ktilde)' dK
        Rinv_k = sla.solve_triangular(self._L, V, lower=True, trans="T")  # (n, p)
        dvar = (
            -2.0
            * self._y_std ** 2
            * self._sigma2
            * np.einsum("pnj,np->pj", dK, Rinv_k)
        )
        return mu, var, dmu, dvar

    def predict_mean_grad(self, Xq: np.ndarray):
        """Mean and its gradient only, (p,) and (p, d).

        Avoids every triangular solve, so it is much cheaper than
        ``predict_with_grad`` when the uncertainty is not needed.
        """
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        p, d = Xq.shape
        if self.is_constant:
            return np.full(p, self._y_mean), np.zeros((p, d))
        diff = Xq[:, None, :] - self.X[None, :, :]
        rho2 = np.einsum("pnj,j->pn", diff * diff, self._lam_eff)
        K = _correlation(self.kernel, rho2)
        if self.kernel == "squared-exponential":
            coef = -K
        else:
            coef = 2.0 * _matern52_dpsi_drho2(rho2)
        dK = coef[:, :, None] * diff * self._lam_eff[None, None, :]
        mu = self._y_mean + self._y_std * (self._beta + K @ self._alpha)
        dmu = self._y_std * np.einsum("pnj,n->pj", dK, self._alpha)
        return mu, dmu

    def summary(self) -> dict:
        """Hyperparameter summary for optional per-iteration model dumps."""
        out = {
            "kernel": self.kernel,
            "theta": [float(t) for t in np.atleast_1d(self.theta)],
            "process_variance": float(self.process_variance),
            "trend": float(self.trend),
            "nugget": float(self.nugget),
            "constant": bool(self.is_constant),
            "nll": None if math.isnan(self.nll) else float(self.nll),
        }
        if self.pls_weights is not None:
            out["pls_weights"] = [
                [float(v) for v in row] for row in self.pls_weights
            ]
        return out


def predict(model: GaussianProcessModel, x):
    """Scalar convenience wrapper: (mu, sigma) at one point."""
    mu, sigma = model.predict(np.atleast_2d(np.asarray(x, dtype=float)))
    return float(mu[0]), float(sigma[0])


def _nll_and_grad(z, stack, ys, nugget, kernel):
    """Concentrated negative log likelihood and gradient in z = log theta.

    The gradient uses the envelope property of the GLS trend (its partial
    derivative vanishes at the optimum), so only the explicit dependence on
    the correlation matrix contributes:

        dNLL/dz_j = tr(R^-1 dR/dz_j) - (n / r'R^-1 r) a' (dR/dz_j) a

    with a = R^-1 r.
    """
    q, n, _ = stack.shape
    lam = np.exp(-2.0 * z)  # lam = theta^-2
    rho2 = np.einsum("j,jab->ab", lam, stack)
    R = _correlation(kernel, rho2)
    R[np.diag_indices(n)] += nugget
    try:
        L = sla.cholesky(R, lower=True, check_finite=False)
    except sla.LinAlgError:
        return 1e25, np.zeros(q)
    ones = np.ones(n)
    a_y = sla.cho_solve((L, True), ys, check_finite=False)
    a_1 = sla.cho_solve((L, True), ones, check_finite=False)
    beta = float(ones @ a_y) / float(ones @ a_1)
    r = ys - beta
    alpha = a_y - beta * a_1  # R^-1 r
    rRr = float(r @ alpha)
    if rRr <= 0:
        return 1e25, np.zeros(q)
    sigma2 = rRr / n
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    nll = n * math.log(sigma2) + logdet
    # gradient
    Rinv = sla.lapack.dpotri(L, lower=True)[0]
    Rinv = Rinv + np.tril(Rinv, -1).T
    G = Rinv - (n / rRr) * np.outer(alpha, alpha)
    if kernel == "squared-exponential":
        H = G * R  # nugget on the diagonal multiplies zero distances there
        # dR/dz_j = lam_j stack_j * Psi; diagonal stack entries are zero so
        # the nugget contamination of R's diagonal is harmless.
        grad = lam * np.einsum("jab,ab->j", stack, H)
    else:
        H = G * _matern52_dpsi_drho2(rho2)
        grad = -2.0 * lam * np.einsum("jab,ab->j", stack, H)
    return nll, grad


def _final_factorization(z, stack, ys, kernel):
    """Build the model state at the chosen z, escalating the nugget."""
    q, n, _ = stack.shape
    lam = np.exp(-2.0 * z)
    rho2 = np.einsum("j,jab->ab", lam, stack)
    Psi = _correlation(kernel, rho2)
    nugget = NUGGET_START
    while True:
        R = Psi.copy()
        R[np.diag_indices(n)] += nugget
        try:
            L = sla.cholesky(R, lower=True, check_finite=False)
            break
        except sla.LinAlgError:
            nugget *= 10.0
            if nugget > NUGGET_MAX:
                raise FitError(
                    "covariance factorization failed at the largest "
                    f"allowed nugget {NUGGET_MAX:g}"
                )
    ones = np.ones(n)
    a_y = sla.cho_solve((L, True), ys, check_finite=False)
    a_1 = sla.cho_solve((L, True), ones, check_finite=False)
    beta = float(ones @ a_y) / float(ones @ a_1)
    alpha = a_y - beta * a_1
    sigma2 = float((ys - beta) @ alpha) / n
    sigma2 = max(sigma2, 1e-300)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    nll = n * math.log(sigma2) + logdet
    return L, alpha, beta, sigma2, nugget, nll


def fit_gp(
    X,
    y,
    kernel: str = "matern52",
    kpls_components: Optional[int] = None,
    pls_weights: Optional[np.ndarray] = None,
    theta=None,
    trend: Optional[float] = None,
    process_variance: Optional[float] = None,
    n_restarts: Optional[int] = None,
    warm_theta=None,
    rng=0,
    opt_maxiter: Optional[int] = None,
) -> GaussianProcessModel:
    """Fit an ordinary-kriging model by concentrated maximum likelihood.

    Parameters
    ----------
    X, y : array_like
        Training inputs in [0, 1]^d (n x d) and outputs (n,).
    kernel : str
        "matern52" (default) or "squared-exponential".
    kpls_components : int, optional
        Fit length-scales in an h-dimensional partial-least-squares
        projection instead of all d dimensions (useful for d > 12).
    pls_weights : ndarray, optional
        Explicit (d, h) projection weights; computed from the data when
        omitted and kpls_components is set.
    theta : array_like, optional
        Fixed length-scales; skips the likelihood search entirely.
    trend, process_variance : float, optional
        Fix the trend or process variance instead of estimating them
        (simple-kriging style); mostly for oracle tests.
    n_restarts : int, optional
        Multi-start count; defaults to 10 for q <= 10 and 20 above.  A
        warm start, when given, runs first, then the theta = 1 start,
        then log-uniform draws in the search box.  With n_restarts=1 and
        a warm start only the warm start is refined, but the theta = 1
        point is always evaluated as a floor on the returned likelihood.
    warm_theta : array_like, optional
        Extra start from a previous fit of the same response.
    rng : int, SeedSequence or Generator
        Source of randomness for the restart draws.
    opt_maxiter : int, optional
        Iteration cap per L-BFGS-B start (default 30); refits warm-start
        close to the optimum and converge well under a smaller cap.

    Returns
    -------
    GaussianProcessModel
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if n < 2:
        raise ConfigError(f"fit_gp needs at least 2 points, got {n}")
    if y.shape != (n,):
        raise ConfigError(f"y has shape {y.shape}, expected ({n},)")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ConfigError("fit_gp requires finite training data")
    if kernel not in ("matern52", "squared-exponential"):
        raise ConfigError(f"unknown kernel {kernel!r}")
    # pairwise-distinct rows, checked in infinity norm
    dist_inf = np.max(np.abs(X[:, None, :] - X[None, :, :]), axis=2)
    dist_inf[np.diag_indices(n)] = np.inf
    if np.min(dist_inf) < 1e-12:
        a, b = np.unravel_index(np.argmin(dist_inf), dist_inf.shape)
        raise ConfigError(
            f"training rows {a} and {b} coincide within 1e-12; "
            "deduplicate before fitting"
        )

    y_mean = float(np.mean(y))
    y_scale = float(np.std(y))
    if y_scale < _Y_STD_FLOOR * max(1.0, abs(y_mean)):
        # Degenerate output: constant model, zero predictive uncertainty.
        q = kpls_components or d
        return GaussianProcessModel(
            kernel=kernel,
            theta=np.ones(q),
            process_variance=0.0,
            trend=y_mean,
            nugget=0.0,
            X=X.copy(),
            y=y.copy(),
            is_constant=True,
            _lam_eff=np.zeros(d),
            _y_mean=y_mean,
            _y_std=1.0,
        )
    ys = (y - y_mean) / y_scale

    W = None
    if pls_weights is not None:
        W = np.asarray(pls_weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != d:
            raise ConfigError(f"pls_weights must be (d, h), got {W.shape}")
    elif kpls_components is not None:
        from .pls import pls_fit

        h = int(kpls_components)
        if not 1 <= h <= min(d, n - 1):
            raise ConfigError(
                f"kpls_components must be in [1, min(d, n-1)] = "
                f"[1, {min(d, n - 1)}], got {h}"
            )
        W = pls_fit(X, ys, h).weights
    q = d if W is None else W.shape[1]

    stack = _sq_dist_stack(X, W)

    if theta is not None:
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.shape != (q,):
            raise ConfigError(f"theta has shape {theta.shape}, expected ({q},)")
        if np.any(theta <= 0):
            raise ConfigError("theta must be strictly positive")
        z_best = np.log(theta)
    else:
        if n_restarts is None:
            n_restarts = 10 if q <= 10 else 20
        rng = _as_rng(rng)
        lo, hi = math.log(THETA_MIN), math.log(THETA_MAX)
        starts = []
        if warm_theta is not None:
            w = np.clip(np.asarray(warm_theta, dtype=float).ravel(), THETA_MIN, THETA_MAX)
            if w.shape == (q,):
                starts.append(np.log(w))
        starts.append(np.zeros(q))
        while len(starts) < n_restarts:
            starts.append(rng.uniform(lo, hi, size=q))
        starts = starts[: max(1, n_restarts)]
        bounds = [(lo, hi)] * q
        maxiter = 30 if opt_maxiter is None else int(opt_maxiter)
        # Baseline at theta = 1 guarantees the returned likelihood is at
        # least as good as the unit-length-scale start, even when that
        # start is not refined.
        z_best = np.zeros(q)
        nll_best = _nll_and_grad(z_best, stack, ys, NUGGET_START, kernel)[0]
        for z0 in starts:
            res = minimize(
                _nll_and_grad,
                z0,
                args=(stack, ys, NUGGET_START, kernel),
                method="L-BFGS-B",
                jac=True,
                bounds=bounds,
                options={"maxiter": maxiter, "maxfun": 2 * maxiter},
            )
            if np.isfinite(res.fun) and res.fun < nll_best:
                nll_best, z_best = float(res.fun), res.x

    if trend is not None or process_variance is not None:
        # Fixed-trend / fixed-variance path used by oracle tests: factorize
        # once and overwrite the concentrated estimates where requested.
        L, alpha, beta, sigma2, nugget, nll = _final_factorization(
            z_best, stack, ys, kernel
        )
        if trend is not None:
            beta = (float(trend) - y_mean) / y_scale
            ones = np.ones(n)
            alpha = sla.cho_solve((L, True), ys - beta * ones, check_finite=False)
        if process_variance is not None:
            sigma2 = float(process_variance) / y_scale ** 2
    else:
        L, alpha, beta, sigma2, nugget, nll = _final_factorization(
            z_best, stack, ys, kernel
        )

    theta_out = np.exp(z_best)
    lam = np.exp(-2.0 * z_best)
    lam_eff = lam if W is None else (W * W) @ lam
    return GaussianProcessModel(
        kernel=kernel,
        theta=theta_out,
        process_variance=sigma2 * y_scale ** 2,
        trend=y_mean + y_scale * beta,
        nugget=nugget,
        X=X.copy(),
        y=y.copy(),
        pls_weights=W,
        nll=nll,
        _lam_eff=lam_eff,
        _L=L,
        _alpha=alpha,
        _beta=beta,
        _sigma2=sigma2,
        _y_mean=y_mean,
        _y_std=y_scale,
    )
