import numpy as np
import pytest

from sego_bench import pls_fit
from sego_bench.errors import ConfigError


def test_weights_shape_and_unit_columns(rng):
    X = rng.random((25, 7))
    y = X @ rng.normal(size=7) + 0.1 * rng.normal(size=25)
    proj = pls_fit(X, y, 3)
    assert proj.weights.shape == (7, 3)
    np.testing.assert_allclose(np.linalg.norm(proj.weights, axis=0), 1.0, atol=1e-12)


def test_first_direction_is_covariance(rng):
    X = rng.random((40, 5))
    y = X @ np.array([2.0, 0.0, -1.0, 0.0, 0.5])
    proj = pls_fit(X, y, 1)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    w = Xc.T @ yc
    w /= np.linalg.norm(w)
    np.testing.assert_allclose(proj.weights[:, 0], w, atol=1e-12)


def test_deterministic(rng):
    X = rng.random((30, 6))
    y = rng.normal(size=30)
    a = pls_fit(X, y, 2).weights
    b = pls_fit(X, y, 2).weights
    np.testing.assert_array_equal(a, b)


def test_zero_variance_column_warns(rng):
    X = rng.random((20, 4))
    X[:, 2] = 0.7
    y = X[:, 0] + X[:, 3]
    with pytest.warns(UserWarning):
        proj = pls_fit(X, y, 2)
    np.testing.assert_allclose(proj.weights[2, :], 0.0, atol=1e-12)


def test_constant_output_falls_back_to_principal_direction(rng):
    X = rng.random((20, 3))
    proj = pls_fit(X, np.full(20, 2.0), 2)
    # no covariance signal anywhere, still returns unit-norm directions
    np.testing.assert_allclose(np.linalg.norm(proj.weights, axis=0), 1.0, atol=1e-12)


def test_component_bounds():
    X = np.random.default_rng(3).random((6, 4))
    y = np.arange(6.0)
    with pytest.raises(ConfigError):
        pls_fit(X, y, 0)
    with pytest.raises(ConfigError):
        pls_fit(X, y, 6)  # h > min(d, n-1)
