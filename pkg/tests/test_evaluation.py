import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riselect.core import CoefficientVector, DimensionMismatch, RngStream, standardize
from riselect.evaluation import (
    edf_monte_carlo,
    edf_study,
    metric_f1,
    metric_pr_k,
    metric_rte,
    metric_s,
    tune_on_validation,
)
from riselect.methods import FitOptions
from riselect.ranking import RankingResult
from riselect.selection import FitSequence, fit_ls_ri
from riselect.simgen import draw_instance, make_design


def ranking(order):
    order = np.asarray(order)
    scores = np.empty(order.size)
    scores[order] = np.arange(order.size, 0, -1.0)
    return RankingResult("test", scores, order)


def scan_s(order, support):
    seen = set()
    for k, j in enumerate(order, start=1):
        seen.add(int(j))
        if set(support) <= seen:
            return k


# S and Pr(k) -----------------------------------------------------------


def test_s_cases():
    r = ranking([4, 1, 0, 2, 3, 5, 6, 7, 8, 9])
    assert metric_s(r, {4, 1, 0}) == 3
    r = ranking([0, 1, 9, 8, 7, 6, 2, 3, 4, 5])
    assert metric_s(r, {0, 1, 2}) == 7


def test_s_requires_support():
    with pytest.raises(ValueError):
        metric_s(ranking(range(5)), set())


def test_pr_k_cases():
    r = ranking([0, 5, 1, 6, 2, 3, 4, 7, 8, 9])
    assert metric_pr_k(r, {0, 1, 2, 3, 4}, 5) == pytest.approx(0.6)
    assert metric_pr_k(r, {1, 2}, 1) == 0.0
    assert metric_pr_k(r, {0, 1, 2, 3, 4}, 7) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.permutations(range(12)), st.sets(st.integers(0, 11), min_size=1))
def test_s_scan_oracle_and_pr_k(perm, support):
    r = ranking(list(perm))
    s = metric_s(r, support)
    assert s == scan_s(perm, support)
    pr = [metric_pr_k(r, support, k) for k in range(1, 13)]
    assert s == min(k for k in range(1, 13) if pr[k - 1] == 1.0)
    assert all(a <= b for a, b in zip(pr, pr[1:]))
    assert len(support) <= s <= 12


# F1 --------------------------------------------------------------------


def test_f1_cases():
    truth = np.array([1.0] * 5 + [0.0] * 5)
    assert metric_f1(truth * 2, truth) == 1.0
    assert metric_f1(np.ones(10), truth) == pytest.approx(2 / 3)
    assert metric_f1(np.zeros(10), truth) == 0.0
    assert metric_f1(np.zeros(10), np.zeros(10)) == 1.0
    assert metric_f1(np.r_[np.zeros(5), np.ones(5)], truth) == 0.0
    with pytest.raises(DimensionMismatch):
        metric_f1(np.ones(3), truth)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.booleans(), min_size=6, max_size=6), st.lists(st.booleans(), min_size=6, max_size=6))
def test_f1_one_iff_identical(a, b):
    f = metric_f1(np.array(a, float), np.array(b, float))
    assert 0.0 <= f <= 1.0
    assert (f == 1.0) == (a == b)


# RTE -------------------------------------------------------------------


def test_rte_cases():
    d = make_design(5, 100, 10, 0.0, 1.0, s=5)
    b0 = d.beta0()
    assert metric_rte(b0, b0, d.sigma(), d.sigma2) == 0.0
    assert metric_rte(np.zeros(10), b0, d.sigma(), d.sigma2) == pytest.approx(1.0)
    d6 = make_design(5, 100, 10, 0.7, 6.0, s=5)
    assert metric_rte(np.zeros(10), d6.beta0(), d6.sigma(), d6.sigma2) == pytest.approx(6.0)
    assert metric_rte(b0, b0, d.sigma(), d.sigma2, plus_one=True) == 1.0


def test_rte_diagonal_oracle(rng):
    diag = rng.uniform(0.5, 2.0, 8)
    b, b0 = rng.standard_normal(8), rng.standard_normal(8)
    want = sum(diag[i] * (b[i] - b0[i]) ** 2 for i in range(8)) / 0.3
    assert metric_rte(b, b0, np.diag(diag), 0.3) == pytest.approx(want, rel=1e-12)
    assert metric_rte(b, b0, np.diag(diag), 0.3) >= 0
    with pytest.raises(DimensionMismatch):
        metric_rte(b, b0[:7], np.diag(diag), 0.3)


# tuning ----------------------------------------------------------------


def _tuning_case(seed, snr, n=100):
    d = make_design(5, n, 10, 0.35, snr, s=5)
    inst = draw_instance(d, RngStream(seed, 0))
    ds = standardize(inst.train)
    return inst, ds, fit_ls_ri(ds, ranking(range(10)), 10)


def test_tune_single_entry(rng):
    inst, ds, seq = _tuning_case(0, 1.0)
    single = FitSequence("one", [seq[3]])
    t = tune_on_validation(single, inst.validation, ds)
    assert t.index == 0 and t.chosen_hyper == {"k": 3}


def test_tune_uses_training_standardization():
    inst, ds, seq = _tuning_case(1, 6.0)
    t = tune_on_validation(seq, inst.validation, ds)
    pred = inst.validation.predictors @ t.raw_coefficients.values + t.intercept
    assert t.validation_mse == pytest.approx(np.mean((pred - inst.validation.response) ** 2), rel=1e-12)


def test_tune_reorder_invariance():
    inst, ds, seq = _tuning_case(2, 1.22)
    t = tune_on_validation(seq, inst.validation, ds)
    perm = np.random.default_rng(0).permutation(len(seq))
    shuffled = FitSequence(seq.method, [seq[i] for i in perm])
    t2 = tune_on_validation(shuffled, inst.validation, ds)
    assert t2.chosen_hyper == t.chosen_hyper
    np.testing.assert_array_equal(t2.coefficients.values, t.coefficients.values)


def test_tune_ties_prefer_smaller_model_then_lambda():
    inst, ds, seq = _tuning_case(3, 1.0)
    b = seq[2].coefficients.values
    tied = FitSequence("t")
    tied.append((0, 1, 2), {"lambda": 0.5}, b, 10)
    tied.append((0, 1), {"lambda": 0.9}, b, 10)
    tied.append((0, 1), {"lambda": 0.1}, b, 10)
    assert tune_on_validation(tied, inst.validation, ds).index == 2


def test_tune_never_underfits_large_n():
    # at n = 10^4 and SNR 6, every model missing a true predictor loses
    for seed in range(20):
        inst, ds, seq = _tuning_case(seed, 6.0, n=10_000)
        assert tune_on_validation(seq, inst.validation, ds).chosen_hyper["k"] >= 5


def test_tune_null_model_more_often_at_low_snr():
    def count_null(snr):
        return sum(tune_on_validation(seq, inst.validation, ds).chosen_hyper["k"] == 0
                   for inst, ds, seq in (_tuning_case(s, snr) for s in range(100)))

    low, high = count_null(0.001), count_null(6.0)
    assert high == 0 and low > 20


# EDF -------------------------------------------------------------------


def _small_design():
    return make_design(4, 40, 6, 0.35, 1.0, s=3)


def test_edf_null_and_full():
    opts = FitOptions(k_max=6)
    curve = edf_study(_small_design(), ["ls-sis"], 400, RngStream(5, 0), opts)["ls-sis"]
    assert curve.edf[curve.point((("k", 0),))] == 0.0
    i = curve.point((("k", 6),))
    assert abs(curve.edf[i] - 6) < 3 * curve.stderr[i]


def test_edf_monte_carlo_records():
    recs = edf_monte_carlo(_small_design(), "fs", [0, 2, 6], 200, RngStream(5, 1), FitOptions(k_max=6))
    assert [r.k for r in recs] == [0, 2, 6] and recs[0].value == 0.0
    assert all(r.metric == "EDF" for r in recs)
    with pytest.raises(ValueError):
        edf_monte_carlo(_small_design(), "fs", [1], 50)


def test_lasso_edf_below_ls_refit():
    curves = edf_study(_small_design(), ["lasso", "rlasso"], 300, RngStream(5, 2),
                       FitOptions(k_max=6, n_lambda=10))
    lasso, relax = curves["lasso"], curves["rlasso"]
    for j, key in enumerate(lasso.keys):
        lam = dict(key)["lambda"]
        r = relax.point(tuple(sorted({"lambda": lam, "gamma": 0.0}.items())))
        diff = relax.contributions[:, r] - lasso.contributions[:, j]
        n = diff.size
        mean = diff.sum() / (n - 1)
        se = diff.std(ddof=1) * np.sqrt(n) / (n - 1)
        assert mean >= -3 * se - 1e-12
