"""Mixture of local Gaussian-process experts.

Clustering runs expectation-maximization for a full-covariance Gaussian
mixture on the joint (inputs, standardized output) space; the expert count
is chosen by BIC.  Each surviving cluster trains its own kriging model and
prediction recombines experts under input-space gating responsibilities,
either hard (argmax) or smooth (moment matching).

With one expert the mixture machinery is bypassed entirely so results are
bit-identical to a single fitted model.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg as sla
from scipy.special import logsumexp

from ..errors import ConfigError
from .gp import GaussianProcessModel, fit_gp, _as_rng

_SIGMA_FLOOR = 1e-12


@dataclass
class MixtureOfExperts:
    """Gated combination of local kriging models."""

    n_experts: int
    experts: list
    gate_means: np.ndarray       # (K, d) input-space cluster means
    gate_covs: np.ndarray        # (K, d, d)
    gate_log_weights: np.ndarray  # (K,)
    recombination: str = "smooth"
    bic_by_k: dict = field(default_factory=dict)
    _gate_chol: np.ndarray = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.experts[0].dimension

    def _responsibilities(self, Xq: np.ndarray) -> np.ndarray:
        """Posterior gate weights at query points, (p, K), rows sum to 1."""
        p = Xq.shape[0]
        K = self.n_experts
        logp = np.empty((p, K))
        for k in range(K):
            logp[:, k] = self.gate_log_weights[k] + _gauss_logpdf(
                Xq, self.gate_means[k], self._gate_chol[k]
            )
        norm = logsumexp(logp, axis=1, keepdims=True)
        # Far from every cluster all densities underflow; fall back to the
        # prior weights there.
        bad = ~np.isfinite(norm[:, 0])
        out = np.exp(logp - np.where(np.isfinite(norm), norm, 0.0))
        if np.any(bad):
            out[bad] = np.exp(
                self.gate_log_weights - logsumexp(self.gate_log_weights)
            )
        return out

    def predict_core(self, Xq: np.ndarray, need_var: bool = True):
        """Mean and variance at query points; single expert passes through."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if self.n_experts == 1:
            return self.experts[0].predict_core(Xq, need_var=need_var)
        w = self._responsibilities(Xq)
        if self.recombination == "hard":
            pick = np.argmax(w, axis=1)
            mu = np.empty(Xq.shape[0])
            var = np.empty(Xq.shape[0]) if need_var else None
            for k in range(self.n_experts):
                mask = pick == k
                if not np.any(mask):
                    continue
                mk, vk = self.experts[k].predict_core(Xq[mask], need_var=need_var)
                mu[mask] = mk
                if need_var:
                    var[mask] = vk
            return mu, var
        mus = np.empty((Xq.shape[0], self.n_experts))
        vars_ = np.empty((Xq.shape[0], self.n_experts))
        for k in range(self.n_experts):
            mk, vk = self.experts[k].predict_core(Xq, need_var=True)
            mus[:, k] = mk
            vars_[:, k] = vk
        mu = np.sum(w * mus, axis=1)
        if not need_var:
            return mu, None
        second = np.sum(w * (vars_ + mus * mus), axis=1)
        return mu, np.maximum(second - mu * mu, 0.0)

    def predict(self, Xq: np.ndarray, need_sigma: bool = True):
        mu, var = self.predict_core(Xq, need_var=need_sigma)
        if not need_sigma:
            return mu, None
        return mu, np.sqrt(var)

    def predict_with_grad(self, Xq: np.ndarray):
        """Mean, variance and gradients under smooth recombination.

        Hard recombination follows the locally selected expert (the gate
        switch itself is non-differentiable and is ignored).
        """
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if self.n_experts == 1:
            return self.experts[0].predict_with_grad(Xq)
        p, d = Xq.shape
        K = self.n_experts
        if self.recombination == "hard":
            w = self._responsibilities(Xq)
            pick = np.argmax(w, axis=1)
            mu = np.empty(p)
            var = np.empty(p)
            dmu = np.empty((p, d))
            dvar = np.empty((p, d))
            for k in range(K):
                mask = pick == k
                if not np.any(mask):
                    continue
                mk, vk, dmk, dvk = self.experts[k].predict_with_grad(Xq[mask])
                mu[mask], var[mask] = mk, vk
                dmu[mask], dvar[mask] = dmk, dvk
            return mu, var, dmu, dvar
        w = self._responsibilities(Xq)  # (p, K)
        # d log N_k / d x = -Sigma_k^-1 (x - m_k); then
        # d w_k = w_k (dlogN_k - sum_j w_j dlogN_j)
        dlog = np.empty((p, K, d))
        for k in range(K):
            diff = Xq - self.gate_means[k]
            sol = sla.cho_solve((self._gate_chol[k], True), diff.T, check_finite=False)
            dlog[:, k, :] = -sol.T
        avg = np.einsum("pk,pkd->pd", w, dlog)
        dw = w[:, :, None] * (dlog - avg[:, None, :])
        mus = np.empty((p, K))
        vars_ = np.empty((p, K))
        dmus = np.empty((p, K, d))
        dvars = np.empty((p, K, d))
        for k in range(K):
            mk, vk, dmk, dvk = self.experts[k].predict_with_grad(Xq)
            mus[:, k], vars_[:, k] = mk, vk
            dmus[:, k, :], dvars[:, k, :] = dmk, dvk
        mu = np.sum(w * mus, axis=1)
        dmu = np.einsum("pkd,pk->pd", dw, mus) + np.einsum("pk,pkd->pd", w, dmus)
        second = np.sum(w * (vars_ + mus * mus), axis=1)
        var = np.maximum(second - mu * mu, 0.0)
        dsecond = np.einsum("pkd,pk->pd", dw, vars_ + mus * mus) + np.einsum(
            "pk,pkd->pd", w, dvars + 2.0 * mus[:, :, None] * dmus
        )
        dvar = dsecond - 2.0 * mu[:, None] * dmu
        dvar[second - mu * mu <= 0.0] = 0.0
        return mu, var, dmu, dvar


def moe_predict(moe: MixtureOfExperts, x):
    """Scalar convenience wrapper: (mu, sigma) at one point."""
    mu, sigma = moe.predict(np.atleast_2d(np.asarray(x, dtype=float)))
    return float(mu[0]), float(sigma[0])


def _gauss_logpdf(Z: np.ndarray, mean: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Log density of N(mean, L L') at rows of Z."""
    dim = mean.shape[0]
    diff = Z - mean
    sol = sla.solve_triangular(chol, diff.T, lower=True, check_finite=False)
    quad = np.sum(sol * sol, axis=0)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * (dim * math.log(2.0 * math.pi) + logdet + quad)


def _em_gmm(Z: np.ndarray, K: int, rng, max_iter: int, tol: float, reg: float):
    """One EM run; returns (loglik, means, covs, log_weights, converged)."""
    n, dim = Z.shape
    # initialize from K distinct random points with nearest-point assignment
    idx = rng.choice(n, size=K, replace=False)
    means = Z[idx].copy()
    d2 = np.sum((Z[:, None, :] - means[None, :, :]) ** 2, axis=2)
    resp = np.zeros((n, K))
    resp[np.arange(n), np.argmin(d2, axis=1)] = 1.0
    covs = np.empty((K, dim, dim))
    log_w = np.empty(K)
    prev_ll = -np.inf
    converged = False
    for it in range(max_iter):
        # M step
        nk = resp.sum(axis=0) + 1e-12
        log_w = np.log(nk / n)
        means = (resp.T @ Z) / nk[:, None]
        for k in range(K):
            diff = Z - means[k]
            covs[k] = (resp[:, k][:, None] * diff).T @ diff / nk[k]
            covs[k][np.diag_indices(dim)] += reg
        # E step
        chols = []
        logp = np.empty((n, K))
        for k in range(K):
            try:
                Lk = sla.cholesky(covs[k], lower=True, check_finite=False)
            except sla.LinAlgError:
                covs[k][np.diag_indices(dim)] += 1e3 * reg
                Lk = sla.cholesky(covs[k], lower=True, check_finite=False)
            chols.append(Lk)
            logp[:, k] = log_w[k] + _gauss_logpdf(Z, means[k], Lk)
        norm = logsumexp(logp, axis=1)
        ll = float(np.sum(norm))
        resp = np.exp(logp - norm[:, None])
        if abs(ll - prev_ll) <= tol * max(1.0, abs(ll)):
            converged = True
            break
        prev_ll = ll
    return ll, means, covs, log_w, converged


def fit_moe(
    X,
    y,
    max_experts: int,
    recombination: str = "smooth",
    kernel: str = "matern52",
    kpls_components: Optional[int] = None,
    n_restarts: Optional[int] = None,
    warm_theta=None,
    rng=0,
    cluster_rng=None,
    em_restarts: int = 5,
    em_max_iter: int = 200,
    em_tol: float = 1e-6,
    opt_maxiter: Optional[int] = None,
) -> MixtureOfExperts:
    """Cluster the data, pick the expert count by BIC, train local models.

    ``rng`` seeds the expert model fits, ``cluster_rng`` the EM restarts;
    keeping them separate makes the single-expert path consume exactly the
    same random stream as a plain fit.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if max_experts < 1:
        raise ConfigError(f"max_experts must be >= 1, got {max_experts}")
    if recombination not in ("smooth", "hard"):
        raise ConfigError(f"unknown recombination {recombination!r}")
    if n < 4 * max_experts:
        raise ConfigError(
            f"need n >= 4 * max_experts = {4 * max_experts} points, got {n}"
        )

    def _single() -> MixtureOfExperts:
        model = fit_gp(
            X, y, kernel=kernel, kpls_components=kpls_components,
            n_restarts=n_restarts, warm_theta=warm_theta, rng=rng,
            opt_maxiter=opt_maxiter,
        )
        return _wrap_single(model, X, recombination)

    if max_experts == 1:
        return _single()

    cluster_rng = _as_rng(0 if cluster_rng is None else cluster_rng)
    y_scale = float(np.std(y))
    ys = (y - np.mean(y)) / (y_scale if y_scale > 0 else 1.0)
    Z = np.column_stack([X, ys])
    reg = 1e-6 * float(np.mean(np.var(Z, axis=0)) + 1e-12)
    dim = Z.shape[1]

    best = {}
    for K in range(1, max_experts + 1):
        if K == 1:
            mean = Z.mean(axis=0)
            diffz = Z - mean
            cov = diffz.T @ diffz / n
            cov[np.diag_indices(dim)] += reg
            L1 = sla.cholesky(cov, lower=True, check_finite=False)
            ll = float(np.sum(_gauss_logpdf(Z, mean, L1)))
            best[K] = (ll, mean[None, :], cov[None, :, :], np.zeros(1))
            continue
        if n < K:
            continue
        kbest = None
        for _ in range(em_restarts):
            ll, means, covs, log_w, ok = _em_gmm(
                Z, K, cluster_rng, em_max_iter, em_tol, reg
            )
            if ok and (kbest is None or ll > kbest[0]):
                kbest = (ll, means.copy(), covs.copy(), log_w.copy())
        if kbest is not None:
            best[K] = kbest

    n_params = {
        K: (K - 1) + K * dim + K * dim * (dim + 1) // 2 for K in best
    }
    bic = {
        K: -2.0 * best[K][0] + n_params[K] * math.log(n) for K in best
    }
    if set(bic) == {1} and max_experts > 1:
        warnings.warn(
            "expectation-maximization did not converge for any K > 1; "
            "falling back to a single expert",
            stacklevel=2,
        )
    K_sel = min(bic, key=lambda K: (bic[K], K))
    if K_sel == 1:
        moe = _single()
        moe.bic_by_k = bic
        return moe

    _, means, covs, log_w = best[K_sel]
    # hard assignment, then merge clusters too small to train on
    logp = np.empty((n, K_sel))
    chols = [
        sla.cholesky(covs[k], lower=True, check_finite=False)
        for k in range(K_sel)
    ]
    for k in range(K_sel):
        logp[:, k] = log_w[k] + _gauss_logpdf(Z, means[k], chols[k])
    labels = np.argmax(logp, axis=1)
    min_size = d + 2
    while True:
        sizes = np.bincount(labels, minlength=K_sel)
        alive = [k for k in range(K_sel) if sizes[k] > 0]
        small = [k for k in alive if sizes[k] < min_size]
        if not small or len(alive) <= 1:
            break
        k_small = min(small, key=lambda k: sizes[k])
        others = [k for k in alive if k != k_small]
        dists = [float(np.sum((means[k_small] - means[k]) ** 2)) for k in others]
        target = others[int(np.argmin(dists))]
        labels[labels == k_small] = target
    alive = sorted(set(labels.tolist()))
    if len(alive) == 1:
        moe = _single()
        moe.bic_by_k = bic
        return moe

    fit_rng = _as_rng(rng)
    experts = []
    gate_means, gate_covs, gate_w = [], [], []
    for k in alive:
        mask = labels == k
        sub_rng = np.random.default_rng(fit_rng.integers(2 ** 63))
        kc = kpls_components
        if kc is not None:
            kc = min(kc, int(np.sum(mask)) - 1)
        experts.append(
            fit_gp(
                X[mask], y[mask], kernel=kernel, kpls_components=kc,
                n_restarts=n_restarts, warm_theta=warm_theta, rng=sub_rng,
                opt_maxiter=opt_maxiter,
            )
        )
        # input-space gate: empirical moments of the cluster members
        Xm = X[mask]
        gm = Xm.mean(axis=0)
        diffx = Xm - gm
        gc = diffx.T @ diffx / Xm.shape[0]
        gc[np.diag_indices(d)] += reg + 1e-8
        gate_means.append(gm)
        gate_covs.append(gc)
        gate_w.append(np.sum(mask) / n)
    gate_means = np.array(gate_means)
    gate_covs = np.array(gate_covs)
    gate_log_w = np.log(np.array(gate_w))
    gate_chol = np.array(
        [
            sla.cholesky(gate_covs[k], lower=True, check_finite=False)
            for k in range(len(alive))
        ]
    )
    return MixtureOfExperts(
        n_experts=len(alive),
        experts=experts,
        gate_means=gate_means,
        gate_covs=gate_covs,
        gate_log_weights=gate_log_w,
        recombination=recombination,
        bic_by_k=bic,
        _gate_chol=gate_chol,
    )


def _wrap_single(
    model: GaussianProcessModel, X: np.ndarray, recombination: str
) -> MixtureOfExperts:
    d = X.shape[1]
    gm = X.mean(axis=0)[None, :]
    diff = X - gm[0]
    gc = (diff.T @ diff / X.shape[0] + 1e-8 * np.eye(d))[None, :, :]
    return MixtureOfExperts(
        n_experts=1,
        experts=[model],
        gate_means=gm,
        gate_covs=gc,
        gate_log_weights=np.zeros(1),
        recombination=recombination,
        _gate_chol=np.array(
            [sla.cholesky(gc[0], lower=True, check_finite=False)]
        ),
    )
