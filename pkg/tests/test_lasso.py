import numpy as np
import pytest

from sparsegev.errors import ConvergenceError, DomainError
from sparsegev.lasso import (fit_lagged_lasso, kkt_residual, lagged_design, lambda_max, lasso_gram,
                             lasso_objective, soft_threshold)

from oracles import fista


def random_problem(n=60, d=8, seed=0, intercept=True):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = X[:, 0] * 1.5 - X[:, 3] * 0.7 + 0.3 * rng.normal(size=n) + 2.0
    if intercept:
        X = np.hstack([np.ones((n, 1)), X])
    pen = np.ones(X.shape[1], bool)
    if intercept:
        pen[0] = False
    return X.T @ X, X.T @ y, float(y @ y), pen


def test_soft_threshold():
    np.testing.assert_array_equal(soft_threshold(np.array([-3.0, -0.5, 0.0, 0.5, 3.0]), 1.0),
                                  [-2.0, 0.0, 0.0, 0.0, 2.0])


@pytest.mark.parametrize("lam", [0.5, 5.0, 40.0])
def test_coordinate_descent_satisfies_kkt_and_matches_fista(lam):
    G, g, yy, pen = random_problem(seed=1)
    res = lasso_gram(G, g, lam, pen, yy=yy)
    assert res.kkt <= 1e-8
    assert kkt_residual(G, g, res.coef, lam, pen) <= 1e-8
    ref = fista(G, g, lam, pen)
    np.testing.assert_allclose(res.coef, ref, atol=1e-8)
    assert lasso_objective(G, g, yy, res.coef, lam, pen) <= lasso_objective(G, g, yy, ref, lam, pen) + 1e-9


def test_zero_penalty_is_least_squares():
    G, g, _, pen = random_problem(seed=2)
    res = lasso_gram(G, g, 0.0, pen)
    np.testing.assert_allclose(res.coef, np.linalg.solve(G, g), atol=1e-9)


def test_penalty_above_lambda_max_zeroes_everything_but_the_intercept():
    G, g, _, pen = random_problem(seed=3)
    lmax = lambda_max(G, g, pen)
    res = lasso_gram(G, g, lmax * 1.0001, pen)
    assert np.all(res.coef[pen] == 0.0)
    # the free intercept is then the mean of y
    assert res.coef[0] == pytest.approx(g[0] / G[0, 0], rel=1e-12)
    below = lasso_gram(G, g, lmax * 0.99, pen)
    assert np.any(below.coef[pen] != 0.0)


def test_intercept_is_not_shrunk():
    # y = 5 + noise, no signal: a huge penalty must leave the intercept at the mean
    rng = np.random.default_rng(4)
    X = np.hstack([np.ones((50, 1)), rng.normal(size=(50, 3))])
    y = 5.0 + rng.normal(size=50)
    res = lasso_gram(X.T @ X, X.T @ y, 1e6, np.array([False, True, True, True]))
    assert res.coef[0] == pytest.approx(y.mean(), rel=1e-12)


def test_zero_curvature_coordinate_stays_at_zero():
    G = np.diag([2.0, 0.0])
    res = lasso_gram(G, np.array([1.0, 3.0]), 0.1, coef0=[0.0, 7.0])
    assert res.coef[1] == 0.0
    assert res.coef[0] == pytest.approx((1.0 - 0.05) / 2.0)


def test_negative_penalty_rejected_and_sweep_cap_raises():
    G, g, _, pen = random_problem(seed=5)
    with pytest.raises(DomainError):
        lasso_gram(G, g, -1.0, pen)
    with pytest.raises(ConvergenceError) as info:
        lasso_gram(G, g, 0.1, pen, tol=0.0, max_sweeps=1)
    assert info.value.last_iterate is not None


def test_lagged_design_orientation():
    v = np.arange(12.0).reshape(6, 2)
    X, Y = lagged_design(v, 2)
    # row 0 predicts t = 2 from (x_1, x_0)
    np.testing.assert_array_equal(X[0], [2.0, 3.0, 0.0, 1.0])
    np.testing.assert_array_equal(Y[0], [4.0, 5.0])


def test_fit_lagged_lasso_recovers_var_support():
    rng = np.random.default_rng(6)
    T, P = 400, 3
    x = np.zeros((T, P))
    for t in range(1, T):
        x[t, 0] = 0.6 * x[t - 1, 0] + rng.normal()
        x[t, 1] = 0.8 * x[t - 1, 0] + rng.normal()
        x[t, 2] = rng.normal()
    # noise gradients are of order 2 sqrt(n) here; the penalty sits well above that
    beta, c = fit_lagged_lasso(x, 150.0, 1)
    support = beta[:, :, 0] != 0
    expected = np.zeros((3, 3), bool)
    expected[0, 0] = expected[1, 0] = True
    np.testing.assert_array_equal(support, expected)
    assert c.shape == (3,)
