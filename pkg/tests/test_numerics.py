import numpy as np
import pytest
import scipy.linalg

from riselect.core import NonPositivePenalty, RankDeficient
from riselect.numerics import (
    SubsetGram,
    inv_sqrt_gram,
    least_squares,
    r_squared,
    reduced_svd,
    ridge_path,
    ridge_solve,
)


def test_svd_orthonormal_input(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((8, 3)))
    svd = reduced_svd(Q)
    assert svd.rank == 3
    np.testing.assert_allclose(svd.singular_values, 1, atol=1e-12)


def test_svd_duplicate_column(rng):
    X = rng.standard_normal((10, 4))
    X[:, 3] = X[:, 1]
    assert reduced_svd(X).rank == 3


def test_svd_wide_random_matrix():
    X = np.random.default_rng(0).standard_normal((50, 1000))
    svd = reduced_svd(X)
    assert svd.rank == 50 == np.linalg.matrix_rank(X)


@pytest.mark.parametrize("shape", [(20, 5), (5, 20), (30, 30)])
def test_svd_reconstruction_and_orthogonality(rng, shape):
    X = rng.standard_normal(shape)
    svd = reduced_svd(X)
    recon = (svd.left * svd.singular_values) @ svd.right.T
    assert np.linalg.norm(recon - X) < 1e-8
    np.testing.assert_allclose(svd.left.T @ svd.left, np.eye(svd.rank), atol=1e-8)
    np.testing.assert_allclose(svd.right.T @ svd.right, np.eye(svd.rank), atol=1e-8)
    assert np.all(np.diff(svd.singular_values) <= 0)


def test_inv_sqrt_gram_identity_and_scalar():
    np.testing.assert_allclose(inv_sqrt_gram(np.eye(4)), np.eye(4), atol=1e-14)
    assert inv_sqrt_gram(np.array([[2.0], [0.0]]))[0, 0] == pytest.approx(0.5)


def test_inv_sqrt_gram_identity_property(rng):
    X = rng.standard_normal((10, 5))
    M = inv_sqrt_gram(X)
    np.testing.assert_allclose(M, M.T, atol=1e-12)
    np.testing.assert_allclose(M @ X.T @ X @ M, np.eye(5), atol=1e-8)
    # independent oracle: inverse of the principal matrix square root
    np.testing.assert_allclose(M, np.linalg.inv(scipy.linalg.sqrtm(X.T @ X).real), atol=1e-8)


def test_inv_sqrt_gram_rank_deficient(rng):
    X = rng.standard_normal((4, 6))
    with pytest.raises(RankDeficient):
        inv_sqrt_gram(X)


def test_least_squares_cases(rng):
    x = rng.standard_normal(12)
    x /= np.linalg.norm(x)
    y = rng.standard_normal(12)
    assert least_squares(x[:, None], y)[0] == pytest.approx(x @ y)
    X = rng.standard_normal((20, 3))
    b = least_squares(X, X @ [1.0, -2.0, 0.5])
    np.testing.assert_allclose(b, [1.0, -2.0, 0.5], atol=1e-12)
    y = rng.standard_normal(20)
    b = least_squares(X, y)
    np.testing.assert_allclose(b, np.linalg.solve(X.T @ X, X.T @ y), atol=1e-10)
    np.testing.assert_allclose(X.T @ (y - X @ b), 0, atol=1e-8)


def test_least_squares_rejects_collinear(rng):
    X = rng.standard_normal((10, 3))
    X[:, 2] = X[:, 0]
    with pytest.raises(RankDeficient):
        least_squares(X, rng.standard_normal(10))


def test_ridge_cases(rng):
    x = rng.standard_normal(15)
    x /= np.linalg.norm(x)
    y = rng.standard_normal(15)
    assert ridge_solve(x[:, None], y, 1.0)[0] == pytest.approx(x @ y / 2)
    X = rng.standard_normal((15, 3))
    np.testing.assert_allclose(ridge_solve(X, y, 1e8), 0, atol=1e-6)
    ref = scipy.linalg.solve(X.T @ X + 0.5 * np.eye(3), X.T @ y, assume_a="pos")
    np.testing.assert_allclose(ridge_solve(X, y, 0.5), ref, atol=1e-12)
    with pytest.raises(NonPositivePenalty):
        ridge_solve(X, y, 0.0)


def test_ridge_path_matches_pointwise_and_shrinks(rng):
    X = rng.standard_normal((25, 4))
    y = rng.standard_normal(25)
    lams = np.geomspace(1e3, 1e-4, 12)
    path = ridge_path(X, y, lams)
    for lam, b in zip(lams, path):
        np.testing.assert_allclose(b, ridge_solve(X, y, lam), atol=1e-10)
    norms = np.linalg.norm(path, axis=1)
    assert np.all(np.diff(norms) >= -1e-12)  # lambdas descend, so norms grow


def test_r_squared_cases(rng):
    y = rng.standard_normal(10)
    y /= np.linalg.norm(y)
    assert r_squared(np.zeros((10, 0)), y) == 0.0
    assert r_squared(np.column_stack([y, rng.standard_normal(10)]), y) == pytest.approx(1.0)
    x = rng.standard_normal(10)
    x /= np.linalg.norm(x)
    assert r_squared(x, y) == pytest.approx((x @ y) ** 2)


def test_r_squared_monotone_on_nested_subsets(rng):
    X = rng.standard_normal((15, 20))
    y = rng.standard_normal(15)
    y /= np.linalg.norm(y)
    order = rng.permutation(20)
    vals = [r_squared(X[:, order[:k]], y) for k in range(21)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(1.0)  # p > n: the columns span R^n


def test_subset_gram_matches_projection(rng):
    X = rng.standard_normal((12, 6))
    X[:, 5] = X[:, 0] + X[:, 1]
    y = rng.standard_normal(12)
    enum = SubsetGram(X.T @ X)
    b = X.T @ y
    for k in range(1, 7):
        got = enum.explained(k, b)
        want = [r_squared(X[:, list(s)], y) * 1.0 for s in enum.subsets(k)]
        # r_squared returns ||P y||^2, valid for any y norm
        np.testing.assert_allclose(got, want, atol=1e-9)
    batch = np.vstack([b, 2 * b])
    np.testing.assert_allclose(enum.explained(3, batch)[1], 4 * enum.explained(3, b), atol=1e-9)
