"""Ranking and fit metrics, validation tuning, and Monte-Carlo degrees of freedom."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CoefficientVector, Dataset, DimensionMismatch, RawData, RngStream, standardize
from .methods import FitOptions, RankingCache, fit_method, normalize_method
from .numerics import SubsetGram
from .ranking import RankingResult
from .selection import FitSequence, lambda_grid
from .simgen import SimDesign, cholesky_factor, draw_predictors


@dataclass(frozen=True)
class MetricRecord:
    design_id: str
    rep: int
    method: str
    metric: str
    value: float
    k: int | None = None
    example: int = 0
    setting: str = ""
    rho: float = float("nan")
    snr: float = float("nan")

    def sort_key(self):
        return (self.design_id, self.rep, self.method, self.metric, -1 if self.k is None else self.k)


def _support(v) -> set:
    values = v.values if isinstance(v, CoefficientVector) else np.asarray(v)
    return set(np.flatnonzero(values).tolist())


def metric_s(ranking: RankingResult, true_support) -> int:
    """Smallest k whose top-k ranked predictors contain every true predictor."""
    support = set(int(i) for i in true_support)
    if not support:
        raise ValueError("true support must be nonempty")
    position = np.empty(ranking.order.size, dtype=int)
    position[ranking.order] = np.arange(1, ranking.order.size + 1)
    return int(max(position[i] for i in support))


def metric_pr_k(ranking: RankingResult, true_support, k: int) -> float:
    support = set(int(i) for i in true_support)
    if not 1 <= k <= ranking.order.size:
        raise ValueError(f"k must lie in [1, {ranking.order.size}]")
    hits = len(support.intersection(ranking.order[:k].tolist()))
    return hits / len(support)


def metric_f1(estimate, truth) -> float:
    """F1 of support recovery.

    Both supports empty gives 1; an empty estimate against a nonempty
    truth, or zero precision and recall, gives 0.
    """
    est, tru = _support(estimate), _support(truth)
    n_est = len(estimate.values if isinstance(estimate, CoefficientVector) else np.asarray(estimate))
    n_tru = len(truth.values if isinstance(truth, CoefficientVector) else np.asarray(truth))
    if n_est != n_tru:
        raise DimensionMismatch(f"estimate has length {n_est}, truth {n_tru}")
    if not est and not tru:
        return 1.0
    tp = len(est & tru)
    if tp == 0:
        return 0.0
    precision, recall = tp / len(est), tp / len(tru)
    return 2 * precision * recall / (precision + recall)


def metric_rte(estimate, truth, sigma: np.ndarray, sigma2: float, plus_one: bool = False) -> float:
    """``(b - b0)^T Sigma (b - b0) / sigma2`` with raw-scale coefficients.

    ``plus_one`` adds 1, the convention under which the Bayes rule scores 1
    instead of 0.
    """
    b = np.asarray(getattr(estimate, "values", estimate), dtype=float)
    b0 = np.asarray(getattr(truth, "values", truth), dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if b.shape != b0.shape or sigma.shape != (b.size, b.size):
        raise DimensionMismatch(f"shapes {b.shape}, {b0.shape}, {sigma.shape} do not conform")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be > 0")
    d = b - b0
    return float(d @ sigma @ d) / sigma2 + (1.0 if plus_one else 0.0)


@dataclass(frozen=True)
class TunedFit:
    method: str
    chosen_hyper: dict
    coefficients: CoefficientVector  # standardized scale
    raw_coefficients: CoefficientVector
    intercept: float
    validation_mse: float
    index: int

    def to_dict(self, names=None) -> dict:
        d = {
            "method": self.method,
            "chosen_hyper": self.chosen_hyper,
            "support": [i + 1 for i in self.coefficients.support],
            "coefficients_standardized": [float(v) for v in self.coefficients.values],
            "coefficients": [float(v) for v in self.raw_coefficients.values],
            "intercept": self.intercept,
            "validation_mse": self.validation_mse,
        }
        if names is not None:
            d["predictors"] = list(names)
        return d


def validation_mse(seq: FitSequence, validation: RawData, train: Dataset) -> np.ndarray:
    """Validation mean squared error of every path entry, predicting on the raw scale."""
    B = seq.coefficient_matrix()
    pred = train.predict_raw(validation.predictors, B)  # (n_val, m)
    resid = pred - validation.response[:, None]
    return np.mean(resid * resid, axis=0)


def tune_on_validation(seq: FitSequence, validation: RawData, train: Dataset) -> TunedFit:
    """Pick the path entry with the least validation MSE.

    Exact ties go to the smaller model, then the smaller lambda, then the
    smaller gamma.
    """
    if len(seq) == 0:
        raise ValueError("cannot tune an empty sequence")
    mse = validation_mse(seq, validation, train)
    best = np.flatnonzero(mse == mse.min())

    def key(i):
        e = seq[i]
        return (e.size, e.hyper.get("lambda", 0.0), e.hyper.get("gamma", 0.0), i)

    i = min(best.tolist(), key=key)
    entry = seq[i]
    slopes, intercept = train.to_raw_coefficients(entry.coefficients.values)
    return TunedFit(seq.method, dict(entry.hyper), entry.coefficients, CoefficientVector(slopes),
                    float(intercept), float(mse[i]), int(i))


# ---------------------------------------------------------------------------
# effective degrees of freedom


@dataclass
class EdfCurve:
    """Monte-Carlo EDF along one method's path.

    ``contributions[b, m]`` is draw b's share of path point m's estimate,
    so that ``edf = contributions.sum(0) / (n_draws - 1)``; paired
    comparisons between methods sharing the same noise draws use it.
    """

    method: str
    keys: list
    edf: np.ndarray
    stderr: np.ndarray
    mean_size: np.ndarray
    contributions: np.ndarray = field(repr=False)

    def point(self, key):
        return self.keys.index(key)


def _edf_from_fits(Y: np.ndarray, fits: np.ndarray, sigma2: float):
    """Y (B, n) responses and fits (B, M, n) -> per-draw contributions (B, M)."""
    Yc = Y - Y.mean(axis=0)
    Fc = fits - fits.mean(axis=0)
    return np.einsum("bn,bmn->bm", Yc, Fc) / sigma2


def _path_key(entry) -> tuple:
    return tuple(sorted(entry.hyper.items()))


def edf_study(design: SimDesign, methods, n_draws: int = 500, stream: RngStream | None = None,
              opts: FitOptions | None = None) -> dict:
    """EDF curves for several methods on one fixed design matrix.

    X is drawn once from the design and standardized; each draw adds fresh
    noise to the fixed mean ``X_raw beta0`` and refits every method on the
    unscaled response.  All methods see the same noise draws.  Lasso
    penalties are frozen from the noiseless mean so every draw shares
    the same path points.
    """
    if n_draws < 2:
        raise ValueError("n_draws must be >= 2")
    stream = stream or RngStream(0, 0)
    opts = opts or FitOptions()
    sigma = design.sigma()
    beta0 = design.beta0().values
    sigma2 = float(beta0 @ sigma @ beta0) / design.snr
    X_raw = draw_predictors(cholesky_factor(sigma), design.n, stream.child("X"))
    mu = X_raw @ beta0
    X = standardize(RawData(X_raw, mu + 1.0)).predictors  # response slot irrelevant here
    methods = [normalize_method(m) for m in methods]
    base = Dataset.fixed_design(X, mu)
    if any(m in ("lasso", "rlasso") for m in methods) and opts.lambdas is None:
        ratio = opts.lambda_min_ratio or (1e-3 if design.n > design.p else 1e-2)
        opts = FitOptions(**{**opts.__dict__, "lambdas": lambda_grid(base, opts.n_lambda, ratio)})
    shared: dict = {}
    if "bs" in methods:
        shared["enumerator"] = SubsetGram(X.T @ X)
    sd = math.sqrt(sigma2)
    Y = np.empty((n_draws, design.n))
    fitted: dict[str, dict] = {m: {} for m in methods}
    sizes: dict[str, dict] = {m: {} for m in methods}
    for b in range(n_draws):
        y = mu + sd * stream.child("noise", b).generator().standard_normal(design.n)
        Y[b] = y
        data = base.with_response(y)
        rankings = RankingCache(data, opts.max_p, opts.rank_tol)
        cache = dict(shared)
        for m in methods:
            seq = fit_method(m, data, opts, rankings, cache)
            for entry in seq:
                key = _path_key(entry)
                fitted[m].setdefault(key, {})[b] = X @ entry.coefficients.values
                sizes[m].setdefault(key, {})[b] = len(entry.coefficients.support)
    curves = {}
    for m in methods:
        # keep only path points present in every draw (LS steps can be skipped)
        keys = [k for k, v in fitted[m].items() if len(v) == n_draws]
        fits = np.stack([np.stack([fitted[m][k][b] for k in keys]) for b in range(n_draws)])
        contrib = _edf_from_fits(Y, fits, sigma2)
        edf = contrib.sum(axis=0) / (n_draws - 1)
        se = contrib.std(axis=0, ddof=1) * math.sqrt(n_draws) / (n_draws - 1)
        mean_size = np.array([np.mean([sizes[m][k][b] for b in range(n_draws)]) for k in keys])
        curves[m] = EdfCurve(m, keys, edf, se, mean_size, contrib)
    return curves


def edf_at_size(curve: EdfCurve, size: float) -> float:
    """EDF interpolated linearly in expected model size."""
    order = np.argsort(curve.mean_size, kind="stable")
    xs, ys = curve.mean_size[order], curve.edf[order]
    xs, idx = np.unique(xs, return_index=True)
    return float(np.interp(size, xs, ys[idx]))


def edf_monte_carlo(design: SimDesign, method: str, sizes, n_draws: int = 500,
                    stream: RngStream | None = None, opts: FitOptions | None = None) -> list[MetricRecord]:
    """EDF records for one method at the requested model sizes.

    Subset-type methods report the path point with exactly that many
    predictors; penalized paths are interpolated in expected model size.
    """
    if n_draws < 100:
        raise ValueError("n_draws must be >= 100")
    curve = edf_study(design, [method], n_draws, stream, opts)[normalize_method(method)]
    out = []
    for k in sizes:
        key = (("k", int(k)),)
        if key in curve.keys:
            value = float(curve.edf[curve.point(key)])
        else:
            value = edf_at_size(curve, k)
        out.append(MetricRecord(design.design_id, 1, normalize_method(method), "EDF", value, int(k),
                                design.example, design.setting, design.rho, design.snr))
    return out
