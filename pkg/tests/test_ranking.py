from itertools import combinations
from math import comb

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import orthonormal_dataset, random_dataset
from riselect.core import Dataset, RawData, TooManyPredictors, standardize
from riselect.numerics import r_squared
from riselect.ranking import order_by_score, rank_cri, rank_criz, rank_gd, rank_sis


def gd_literal(X, y):
    """General dominance summed term by term over explicit subset lists."""
    p = X.shape[1]
    out = np.zeros(p)
    for i in range(p):
        others = [j for j in range(p) if j != i]
        for size in range(p):
            for S in combinations(others, size):
                gain = r_squared(X[:, list(S) + [i]], y) - r_squared(X[:, list(S)], y)
                out[i] += gain / comb(p - 1, size)
    return out / p


def johnson_rw(X, y):
    root = scipy.linalg.sqrtm(X.T @ X).real
    w = np.linalg.solve(root, X.T @ y)  # Z^T y with Z = X (X^T X)^{-1/2}
    return (root**2) @ (w**2), w**2


def test_sis_scores():
    y = np.array([1.0, -1.0, 0.0])
    y /= np.linalg.norm(y)
    x_orth = np.array([1.0, 1.0, -2.0])
    x_orth /= np.linalg.norm(x_orth)
    ds = Dataset(np.column_stack([x_orth, y]), y, np.zeros(2), np.ones(2))
    r = rank_sis(ds)
    np.testing.assert_allclose(r.scores, [0.0, 1.0], atol=1e-15)
    assert list(r.order) == [1, 0]


def test_sis_orders_by_absolute_value(rng):
    ds = random_dataset(rng, 30, 5)
    r = rank_sis(ds)
    assert np.any(r.scores < 0) or True
    assert list(r.order) == list(order_by_score(np.abs(ds.predictors.T @ ds.response)))


def test_gd_single_predictor(rng):
    ds = random_dataset(rng, 20, 1)
    assert rank_gd(ds).scores[0] == pytest.approx(r_squared(ds.predictors, ds.response))


def test_gd_orthogonal_pair(rng):
    ds = orthonormal_dataset(rng, 20, 2)
    np.testing.assert_allclose(rank_gd(ds).scores, (ds.predictors.T @ ds.response) ** 2, atol=1e-12)


def test_gd_matches_literal_formula_correlated_three():
    rng = np.random.default_rng(3)
    C = np.full((3, 3), 0.5) + 0.5 * np.eye(3)
    X = rng.standard_normal((40, 3)) @ np.linalg.cholesky(C).T
    y = X @ [1.0, 0.3, -0.6] + rng.standard_normal(40)
    ds = standardize(RawData(X, y))
    np.testing.assert_allclose(rank_gd(ds).scores, gd_literal(ds.predictors, ds.response), atol=1e-10)


@pytest.mark.parametrize("n,p,collinear", [(30, 6, False), (8, 7, False), (25, 5, True)])
def test_gd_literal_oracle_regimes(n, p, collinear):
    ds = random_dataset(np.random.default_rng(n * p), n, p, collinear)
    np.testing.assert_allclose(rank_gd(ds).scores, gd_literal(ds.predictors, ds.response), atol=1e-9)


def test_gd_guard(rng):
    ds = random_dataset(rng, 30, 21)
    with pytest.raises(TooManyPredictors):
        rank_gd(ds)


def test_gd_dummy_predictor(rng):
    # last column orthogonal to y and to every other predictor
    ds = orthonormal_dataset(rng, 30, 4)
    X = ds.predictors.copy()
    y = ds.response - (ds.response @ X[:, 3]) * X[:, 3]
    y /= np.linalg.norm(y)
    mix = X[:, :3] @ np.array([[1, 0.6, 0.2], [0, 1, 0.5], [0, 0, 1.0]])
    mix /= np.linalg.norm(mix, axis=0)
    X[:, :3] = mix
    ds2 = Dataset(X, y, np.zeros(4), np.ones(4))
    assert abs(rank_gd(ds2).scores[3]) < 1e-10


def test_cri_criz_orthonormal(rng):
    ds = orthonormal_dataset(rng, 25, 5)
    want = (ds.predictors.T @ ds.response) ** 2
    np.testing.assert_allclose(rank_cri(ds).scores, want, atol=1e-12)
    np.testing.assert_allclose(rank_criz(ds).scores, want, atol=1e-12)


def test_cri_and_criz_match_johnson_route(rng):
    ds = random_dataset(rng, 30, 5)
    rw, w2 = johnson_rw(ds.predictors, ds.response)
    np.testing.assert_allclose(rank_cri(ds).scores, rw, atol=1e-8)
    np.testing.assert_allclose(rank_criz(ds).scores, w2, atol=1e-8)


@pytest.mark.parametrize("n,p,collinear", [(30, 5, False), (15, 40, False), (30, 6, True)])
def test_scores_sum_to_r_squared(n, p, collinear):
    ds = random_dataset(np.random.default_rng(p), n, p, collinear)
    r2 = r_squared(ds.predictors, ds.response)
    assert rank_cri(ds).scores.sum() == pytest.approx(r2, abs=1e-8)
    assert rank_criz(ds).scores.sum() == pytest.approx(r2, abs=1e-8)
    if p <= 10:
        assert rank_gd(ds).scores.sum() == pytest.approx(r2, abs=1e-8)


def test_orthogonal_design_orders_coincide(rng):
    ds = orthonormal_dataset(rng, 30, 6)
    orders = [list(f(ds).order) for f in (rank_sis, rank_gd, rank_cri, rank_criz)]
    assert all(o == orders[0] for o in orders)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.permutations(range(5)))
def test_permutation_equivariance(seed, perm):
    ds = random_dataset(np.random.default_rng(seed), 20, 5)
    perm = list(perm)
    pds = Dataset(ds.predictors[:, perm], ds.response, ds.centers_x[perm], ds.scales_x[perm])
    for f in (rank_sis, rank_gd, rank_cri, rank_criz):
        np.testing.assert_allclose(f(pds).scores, f(ds).scores[perm], atol=1e-12, rtol=1e-10)


def test_ties_break_by_index():
    assert list(order_by_score([1.0, 3.0, 1.0, 3.0, 0.0])) == [1, 3, 0, 2, 4]


def test_suppressor_ranks_low_for_sis_large_n():
    from riselect.core import RngStream
    from riselect.simgen import draw_instance, make_design

    design = make_design(2, 10_000, 10, 0.7, 6.0, setting="check")
    ds = standardize(draw_instance(design, RngStream(9, 9)).train)
    r = rank_sis(ds)
    assert np.all(np.abs(r.scores[3]) < np.abs(r.scores[:3]))
    assert abs(r.scores[3]) < 0.05
