import math

import numpy as np
import pytest

from sego_bench import fit_gp, pls_fit, predict
from sego_bench.errors import ConfigError
from sego_bench.surrogate.gp import _nll_and_grad, _sq_dist_stack


def dense_oracle(X, y, theta, kernel, nugget):
    """Straight textbook ordinary kriging with explicit matrix inverses.

    Kept deliberately naive (pairwise loops, np.linalg.solve) so it shares
    no code path with the production predictor.
    """
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    n, d = X.shape
    R = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            r2 = float(np.sum(((X[a] - X[b]) / theta) ** 2))
            R[a, b] = _psi(kernel, r2)
    R[np.diag_indices(n)] += nugget
    Rinv = np.linalg.inv(R)
    ones = np.ones(n)
    beta = (ones @ Rinv @ y) / (ones @ Rinv @ ones)
    resid = y - beta
    alpha = Rinv @ resid
    sigma2 = (resid @ alpha) / n

    def mu_var(x):
        k = np.array(
            [_psi(kernel, float(np.sum(((x - X[b]) / theta) ** 2))) for b in range(n)]
        )
        mu = beta + k @ alpha
        var = sigma2 * (1.0 + nugget - k @ Rinv @ k)
        return mu, max(var, 0.0)

    return beta, sigma2, mu_var


def _psi(kernel, r2):
    if kernel == "squared-exponential":
        return math.exp(-0.5 * r2)
    r = math.sqrt(r2)
    c = math.sqrt(5.0) * r
    return (1.0 + c + (5.0 / 3.0) * r2) * math.exp(-c)


@pytest.mark.parametrize("kernel", ["matern52", "squared-exponential"])
def test_fixed_theta_matches_dense_oracle(kernel, rng):
    X = rng.random((8, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    theta = np.array([0.5, 0.8])
    model = fit_gp(X, y, kernel=kernel, theta=theta)
    _, _, mu_var = dense_oracle(X, y, theta, kernel, model.nugget)
    Xq = rng.random((40, 2))
    mu, sigma = model.predict(Xq)
    for i, x in enumerate(Xq):
        mu_o, var_o = mu_var(x)
        assert mu[i] == pytest.approx(mu_o, abs=1e-8)
        assert sigma[i] == pytest.approx(math.sqrt(var_o), abs=1e-8)


def test_two_point_hand_values():
    # X = {0, 1}, y = {0, 2}, theta = 1, sqexp. By symmetry beta = 1 and
    # at the midpoint both correlations equal psi(0.25); mu there is
    # beta + k'R^-1 (y - beta) = 1 exactly.
    X = np.array([[0.0], [1.0]])
    y = np.array([0.0, 2.0])
    model = fit_gp(X, y, kernel="squared-exponential", theta=[1.0])
    assert model.trend == pytest.approx(1.0, abs=1e-9)
    mu, _ = model.predict(np.array([[0.5]]))
    assert mu[0] == pytest.approx(1.0, abs=1e-9)
    # closed form at x = 0.25 against the same 2x2 system by hand
    psi = lambda r2: math.exp(-0.5 * r2)
    w = psi(1.0) + model.nugget * 0.0
    k = np.array([psi(0.0625), psi(0.5625)])
    R = np.array([[1.0 + model.nugget, w], [w, 1.0 + model.nugget]])
    expect = 1.0 + k @ np.linalg.solve(R, y - 1.0)
    mu2, _ = model.predict(np.array([[0.25]]))
    assert mu2[0] == pytest.approx(expect, abs=1e-9)


def test_nll_gradient_matches_finite_differences(rng):
    X = rng.random((12, 3))
    y = np.cos(4 * X[:, 0]) + 2 * X[:, 1] * X[:, 2]
    ys = (y - y.mean()) / y.std()
    stack = _sq_dist_stack(X, None)
    z = np.array([-0.3, 0.4, 0.1])
    for kernel in ("matern52", "squared-exponential"):
        f0, g = _nll_and_grad(z, stack, ys, 1e-10, kernel)
        h = 1e-6
        for j in range(3):
            zp, zm = z.copy(), z.copy()
            zp[j] += h
            zm[j] -= h
            fp = _nll_and_grad(zp, stack, ys, 1e-10, kernel)[0]
            fm = _nll_and_grad(zm, stack, ys, 1e-10, kernel)[0]
            fd = (fp - fm) / (2 * h)
            assert g[j] == pytest.approx(fd, rel=1e-4, abs=1e-6), kernel


def test_interpolation_at_training_points(rng):
    for trial in range(5):
        n = int(rng.integers(6, 30))
        d = int(rng.integers(1, 6))
        X = rng.random((n, d))
        y = rng.normal(size=n) * 10 + 5
        model = fit_gp(X, y, n_restarts=3, rng=int(rng.integers(1 << 30)))
        mu, _ = model.predict(X)
        span = max(y.max() - y.min(), 1e-12)
        assert np.max(np.abs(mu - y)) <= 1e-6 * span


def test_far_field_reverts_to_trend(rng):
    X = 0.5 + 0.01 * rng.random((10, 2))
    y = np.sin(20 * X[:, 0]) + X[:, 1]
    model = fit_gp(X, y, theta=[0.05, 0.05])
    far = np.array([[40.0, -40.0]])
    mu, sigma = model.predict(far)
    assert mu[0] == pytest.approx(model.trend, abs=1e-9)
    assert sigma[0] == pytest.approx(
        math.sqrt(model.process_variance * (1.0 + model.nugget)), rel=1e-9
    )


def test_prediction_invariant_to_data_permutation(rng):
    X = rng.random((15, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + np.sin(5 * X[:, 0])
    perm = rng.permutation(15)
    theta = np.array([0.4, 0.6, 0.9])
    m1 = fit_gp(X, y, theta=theta)
    m2 = fit_gp(X[perm], y[perm], theta=theta)
    Xq = rng.random((20, 3))
    mu1, s1 = m1.predict(Xq)
    mu2, s2 = m2.predict(Xq)
    np.testing.assert_allclose(mu1, mu2, atol=1e-9)
    np.testing.assert_allclose(s1, s2, atol=1e-9)


def test_likelihood_never_worse_than_unit_start(rng):
    for trial in range(4):
        X = rng.random((14, 4))
        y = rng.normal(size=14)
        seed = int(rng.integers(1 << 30))
        fitted = fit_gp(X, y, n_restarts=4, rng=seed)
        baseline = fit_gp(X, y, theta=np.ones(4))
        assert fitted.nll <= baseline.nll + 1e-9


def test_output_scale_equivariance(rng):
    # predictions in physical units must not depend on the y scaling
    X = rng.random((10, 2))
    y = rng.normal(size=10)
    theta = np.array([0.3, 0.7])
    base = fit_gp(X, y, theta=theta)
    shifted = fit_gp(X, 1000.0 + 50.0 * y, theta=theta)
    Xq = rng.random((7, 2))
    mu_b, s_b = base.predict(Xq)
    mu_s, s_s = shifted.predict(Xq)
    np.testing.assert_allclose(mu_s, 1000.0 + 50.0 * mu_b, rtol=1e-9, atol=1e-7)
    np.testing.assert_allclose(s_s, 50.0 * s_b, rtol=1e-9, atol=1e-9)


def test_gradients_match_finite_differences(rng):
    X = rng.random((12, 3))
    y = np.exp(-X[:, 0]) + X[:, 1] * X[:, 2]
    model = fit_gp(X, y, theta=[0.5, 0.4, 0.8])
    Xq = rng.random((5, 3))
    mu, var, dmu, dvar = model.predict_with_grad(Xq)
    mu0, sig0 = model.predict(Xq)
    np.testing.assert_allclose(mu, mu0, atol=1e-12)
    np.testing.assert_allclose(var, sig0 ** 2, atol=1e-12)
    h = 1e-6
    for i in range(Xq.shape[0]):
        for j in range(3):
            xp, xm = Xq[i].copy(), Xq[i].copy()
            xp[j] += h
            xm[j] -= h
            mp, sp = model.predict(np.array([xp, xm]))
            assert dmu[i, j] == pytest.approx(
                (mp[0] - mp[1]) / (2 * h), rel=2e-4, abs=2e-6
            )
            assert dvar[i, j] == pytest.approx(
                (sp[0] ** 2 - sp[1] ** 2) / (2 * h), rel=2e-4, abs=2e-6
            )


def test_mean_grad_shortcut_consistent(rng):
    X = rng.random((9, 2))
    y = np.sin(6 * X[:, 0]) * X[:, 1]
    model = fit_gp(X, y, theta=[0.3, 0.3])
    Xq = rng.random((11, 2))
    mu_full, _, dmu_full, _ = model.predict_with_grad(Xq)
    mu, dmu = model.predict_mean_grad(Xq)
    np.testing.assert_allclose(mu, mu_full, atol=1e-12)
    np.testing.assert_allclose(dmu, dmu_full, atol=1e-12)


def test_constant_data_short_circuits():
    X = np.random.default_rng(0).random((6, 2))
    model = fit_gp(X, np.full(6, 3.25))
    assert model.is_constant
    mu, sigma = model.predict(np.array([[0.1, 0.9], [5.0, 5.0]]))
    np.testing.assert_allclose(mu, 3.25)
    np.testing.assert_allclose(sigma, 0.0)


def test_coincident_rows_rejected(rng):
    X = np.vstack([rng.random((6, 2))] * 2)  # every point twice
    y = np.concatenate([np.arange(6.0), np.arange(6.0) + 1e-3])
    with pytest.raises(ConfigError):
        fit_gp(X, y, theta=[0.5, 0.5])


def test_near_coincident_rows_stay_finite(rng):
    base = rng.random((6, 2))
    X = np.vstack([base, base + 2e-6])
    y = np.concatenate([np.arange(6.0), np.arange(6.0) + 1e-3])
    model = fit_gp(X, y, theta=[0.5, 0.5])
    assert model.nugget >= 1e-10
    mu, sigma = model.predict(rng.random((4, 2)))
    assert np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))


def test_kpls_reduces_fit_space_and_interpolates(rng):
    d, n, h = 15, 30, 3
    X = rng.random((n, d))
    w = rng.normal(size=d)
    y = np.sin(X @ w) + 0.1 * X[:, 0]
    model = fit_gp(X, y, kpls_components=h, n_restarts=3, rng=7)
    assert model.theta.shape == (h,)
    assert model.pls_weights.shape == (d, h)
    mu, _ = model.predict(X)
    span = y.max() - y.min()
    assert np.max(np.abs(mu - y)) <= 1e-6 * span


def test_kpls_weights_can_be_supplied(rng):
    X = rng.random((20, 6))
    y = X @ np.array([3.0, -1.0, 0.0, 0.0, 2.0, 0.5])
    proj = pls_fit(X, y, 2)
    m = fit_gp(X, y, kpls_components=2, pls_weights=proj.weights, theta=[0.7, 0.7])
    np.testing.assert_array_equal(m.pls_weights, proj.weights)


def test_rejects_bad_inputs(rng):
    X = rng.random((5, 2))
    y = np.arange(5.0)
    with pytest.raises(ConfigError):
        fit_gp(X, y, kernel="rbf-nope")
    with pytest.raises(ConfigError):
        fit_gp(X, y, theta=[1.0])  # wrong length
    with pytest.raises(ConfigError):
        fit_gp(X, y, theta=[1.0, -2.0])
    with pytest.raises(ConfigError):
        fit_gp(X, y[:4])
