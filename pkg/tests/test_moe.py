import numpy as np
import pytest

from sego_bench import fit_gp, fit_moe, moe_predict
from sego_bench.errors import ConfigError


def bimodal_data(rng, n_per=30):
    """Two tight input clusters carrying very different local behavior."""
    Xa = 0.15 + 0.08 * rng.random((n_per, 2))
    Xb = 0.80 + 0.08 * rng.random((n_per, 2))
    ya = 10.0 * Xa[:, 0] + Xa[:, 1]
    yb = -40.0 * Xb[:, 0] + 25.0 * np.sin(8 * Xb[:, 1])
    X = np.vstack([Xa, Xb])
    y = np.concatenate([ya, yb])
    return X, y


def test_single_expert_identical_to_plain_gp(rng):
    X = rng.random((16, 3))
    y = np.sin(4 * X[:, 0]) + X[:, 1] - X[:, 2] ** 2
    gp = fit_gp(X, y, n_restarts=3, rng=11)
    moe = fit_moe(X, y, max_experts=1, n_restarts=3, rng=11)
    assert moe.n_experts == 1
    Xq = rng.random((10, 3))
    mu_g, s_g = gp.predict(Xq)
    mu_m, s_m = moe.predict(Xq)
    np.testing.assert_array_equal(mu_m, mu_g)
    np.testing.assert_array_equal(s_m, s_g)


def test_bic_splits_bimodal_data(rng):
    X, y = bimodal_data(rng)
    moe = fit_moe(X, y, max_experts=3, n_restarts=2, rng=5, cluster_rng=5)
    assert moe.n_experts >= 2
    assert set(moe.bic_by_k) >= {1, moe.n_experts}
    # each training point is reproduced by the mixture
    mu, _ = moe.predict(X)
    span = y.max() - y.min()
    assert np.max(np.abs(mu - y)) <= 1e-3 * span


def test_hard_recombination_uses_local_expert(rng):
    X, y = bimodal_data(rng)
    moe = fit_moe(
        X, y, max_experts=2, recombination="hard", n_restarts=2, rng=5, cluster_rng=5
    )
    if moe.n_experts < 2:
        pytest.skip("clustering merged the modes on this draw")
    deep = np.array([[0.18, 0.18]])  # far inside the first cluster
    mu, _ = moe.predict(deep)
    per_expert = [e.predict(deep)[0][0] for e in moe.experts]
    assert min(abs(mu[0] - v) for v in per_expert) <= 1e-12


def test_smooth_moments_match_mixture_formula(rng):
    X, y = bimodal_data(rng)
    moe = fit_moe(X, y, max_experts=2, n_restarts=2, rng=5, cluster_rng=5)
    if moe.n_experts < 2:
        pytest.skip("clustering merged the modes on this draw")
    Xq = rng.random((20, 2))
    w = moe._responsibilities(Xq)
    mus = np.column_stack([e.predict(Xq)[0] for e in moe.experts])
    sig = np.column_stack([e.predict(Xq)[1] for e in moe.experts])
    mu_exp = np.sum(w * mus, axis=1)
    var_exp = np.sum(w * (sig ** 2 + mus ** 2), axis=1) - mu_exp ** 2
    mu, s = moe.predict(Xq)
    np.testing.assert_allclose(mu, mu_exp, atol=1e-10)
    np.testing.assert_allclose(s ** 2, np.maximum(var_exp, 0.0), atol=1e-10)


def test_smooth_gradients_match_finite_differences(rng):
    X, y = bimodal_data(rng, n_per=20)
    moe = fit_moe(X, y, max_experts=2, n_restarts=2, rng=5, cluster_rng=5)
    Xq = np.array([[0.3, 0.4], [0.6, 0.55]])
    mu, var, dmu, dvar = moe.predict_with_grad(Xq)
    h = 1e-6
    for i in range(len(Xq)):
        for j in range(2):
            xp, xm = Xq[i].copy(), Xq[i].copy()
            xp[j] += h
            xm[j] -= h
            mp, sp = moe.predict(np.array([xp, xm]))
            assert dmu[i, j] == pytest.approx(
                (mp[0] - mp[1]) / (2 * h), rel=5e-4, abs=5e-6
            )
            assert dvar[i, j] == pytest.approx(
                (sp[0] ** 2 - sp[1] ** 2) / (2 * h), rel=5e-4, abs=5e-6
            )


def test_needs_four_points_per_expert(rng):
    X = rng.random((7, 2))
    y = np.arange(7.0)
    with pytest.raises(ConfigError):
        fit_moe(X, y, max_experts=2)  # 7 < 4 * 2


def test_single_em_iteration_still_returns_model(rng):
    X, y = bimodal_data(rng, n_per=12)
    with pytest.warns(UserWarning, match="did not converge"):
        moe = fit_moe(X, y, max_experts=2, em_max_iter=1, n_restarts=1, rng=0,
                      cluster_rng=0)
    mu, s = moe.predict(rng.random((5, 2)))
    assert np.all(np.isfinite(mu)) and np.all(np.isfinite(s))


def test_moe_predict_wrapper(rng):
    X = rng.random((12, 2))
    y = X[:, 0] + X[:, 1]
    moe = fit_moe(X, y, max_experts=1, n_restarts=1, rng=0)
    mu, s = moe_predict(moe, [0.5, 0.5])
    assert isinstance(mu, float) and isinstance(s, float)


def test_validation_errors(rng):
    X = rng.random((20, 2))
    y = np.arange(20.0)
    with pytest.raises(ConfigError):
        fit_moe(X, y, max_experts=0)
    with pytest.raises(ConfigError):
        fit_moe(X, y, max_experts=2, recombination="soft-ish")
