"""Model sequences: ranking-driven LS/ridge fits and the benchmark selectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    ActiveSet,
    CoefficientVector,
    Dataset,
    NonPositivePenalty,
    NoConvergence,
    RankDeficient,
    TooManyPredictors,
)
from .numerics import SubsetGram, least_squares, min_norm_least_squares, ridge_path
from .ranking import RankingResult


@dataclass(frozen=True)
class FitEntry:
    active_set: ActiveSet
    hyper: dict
    coefficients: CoefficientVector

    @property
    def size(self) -> int:
        return len(self.active_set)


@dataclass
class FitSequence:
    """An ordered path of fitted models produced by one method."""

    method: str
    path: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def __len__(self):
        return len(self.path)

    def __iter__(self):
        return iter(self.path)

    def __getitem__(self, i) -> FitEntry:
        return self.path[i]

    def append(self, active, hyper: dict, values: np.ndarray, p: int) -> None:
        self.path.append(FitEntry(ActiveSet(tuple(active), p), dict(hyper), CoefficientVector(values)))

    def coefficient_matrix(self) -> np.ndarray:
        if not self.path:
            return np.zeros((0, 0))
        return np.vstack([e.coefficients.values for e in self.path])

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "path": [
                {
                    "active_set": e.active_set.one_based(),
                    "hyper": e.hyper,
                    "coefficients": [float(v) for v in e.coefficients.values],
                }
                for e in self.path
            ],
            "diagnostics": list(self.diagnostics),
        }


@dataclass(frozen=True)
class PenaltyGrid:
    values: np.ndarray
    count: int
    lambda_max: float
    lambda_min: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.size == 0 or np.any(v <= 0) or np.any(np.diff(v) >= 0):
            raise NonPositivePenalty(f"penalty grid must be positive and strictly descending: {v}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def log_spaced(cls, count: int, lambda_max: float = 1e3, lambda_min: float = 1e-4) -> "PenaltyGrid":
        if not (lambda_max > 0 and lambda_min > 0):
            raise NonPositivePenalty(f"penalties must be > 0, got {lambda_max}, {lambda_min}")
        if count == 1:
            return cls(np.array([lambda_max]), 1, lambda_max, lambda_max)
        return cls(np.geomspace(lambda_max, lambda_min, count), count, lambda_max, lambda_min)

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)


def _check_k_max(data: Dataset, k_max: int) -> int:
    limit = min(data.n - 1, data.p)
    if k_max < 0 or k_max > limit:
        raise ValueError(f"k_max must lie in [0, {limit}], got {k_max}")
    return int(k_max)


def fit_ls_ri(data: Dataset, ranking: RankingResult, k_max: int, label: str | None = None) -> FitSequence:
    """Least-squares fits on the top-k predictors of a ranking, k = 0..k_max."""
    k_max = _check_k_max(data, k_max)
    X, y, p = data.predictors, data.response, data.p
    seq = FitSequence(label or f"LS-{ranking.method}")
    seq.append((), {"k": 0}, np.zeros(p), p)
    for k in range(1, k_max + 1):
        active = ranking.order[:k]
        try:
            sub = least_squares(X[:, active], y)
        except RankDeficient as exc:
            seq.diagnostics.append(f"k={k} skipped: {exc}")
            continue
        seq.append(active, {"k": k}, _embed(p, active, sub), p)
    return seq


def fit_ridge_ri(
    data: Dataset, ranking: RankingResult, k_max: int, grid: PenaltyGrid, label: str | None = None
) -> FitSequence:
    """Ridge fits on the top-k predictors for each k in 1..k_max and each grid penalty."""
    if not isinstance(grid, PenaltyGrid):
        grid = PenaltyGrid(np.asarray(grid, dtype=float), len(grid), float(np.max(grid)), float(np.min(grid)))
    k_max = _check_k_max(data, k_max)
    X, y, p = data.predictors, data.response, data.p
    seq = FitSequence(label or f"Ridge-{ranking.method}")
    seq.append((), {"k": 0}, np.zeros(p), p)
    for k in range(1, k_max + 1):
        active = ranking.order[:k]
        sols = ridge_path(X[:, active], y, grid.values)
        for lam, sub in zip(grid.values, sols):
            seq.append(active, {"k": k, "lambda": float(lam)}, _embed(p, active, sub), p)
    return seq


def _embed(p: int, active, sub) -> np.ndarray:
    v = np.zeros(p)
    v[np.asarray(active, dtype=np.intp)] = sub
    return v


def forward_stepwise(data: Dataset, k_max: int) -> FitSequence:
    """Greedy forward selection by largest drop in residual sum of squares.

    Candidates are scored against an orthonormal basis of the current
    active set; a candidate already in its span is never preferred over
    one that is not.  Ties go to the lowest index.
    """
    k_max = _check_k_max(data, k_max)
    X, y, p = data.predictors, data.response, data.p
    seq = FitSequence("FS")
    seq.append((), {"k": 0}, np.zeros(p), p)
    col_norm2 = np.sum(X * X, axis=0)
    R = X.copy()  # candidate columns with the active span projected out
    res = y.copy()
    active: list[int] = []
    available = np.ones(p, dtype=bool)
    for k in range(1, k_max + 1):
        norm2 = np.sum(R * R, axis=0)
        usable = available & (norm2 > 1e-10 * col_norm2)
        if not np.any(usable):
            seq.diagnostics.append(f"stopped at k={k}: remaining predictors lie in the active span")
            break
        score = np.full(p, -1.0)
        score[usable] = (R[:, usable].T @ res) ** 2 / norm2[usable]
        j = int(np.argmax(score))
        q = R[:, j] / np.sqrt(norm2[j])
        R -= np.outer(q, q @ R)
        res = res - q * (q @ res)
        active.append(j)
        available[j] = False
        seq.append(active, {"k": k}, _embed(p, active, least_squares(X[:, active], y)), p)
    return seq


def best_subset(
    data: Dataset, k_max: int, max_p: int = 20, enumerator: SubsetGram | None = None
) -> FitSequence:
    """Exhaustive best subset of each size k = 0..k_max.

    Ties in RSS go to the lexicographically smallest index set.  Pass a
    prebuilt ``enumerator`` to reuse the per-subset factorizations across
    responses that share the same design.
    """
    if data.p > max_p:
        raise TooManyPredictors(data.p, max_p, "best subset")
    k_max = _check_k_max(data, k_max)
    X, y, p = data.predictors, data.response, data.p
    enum = enumerator if enumerator is not None else SubsetGram(X.T @ X)
    b = X.T @ y
    seq = FitSequence("BS")
    seq.append((), {"k": 0}, np.zeros(p), p)
    for k in range(1, k_max + 1):
        j = int(np.argmax(enum.explained(k, b)))
        active = enum.subsets(k)[j]
        seq.append(active, {"k": k}, _embed(p, active, min_norm_least_squares(X[:, active], y)), p)
    return seq


def lambda_grid(data: Dataset, n_lambda: int, lambda_min_ratio: float) -> np.ndarray:
    """Log-spaced penalties from the smallest all-zero penalty downwards."""
    if n_lambda < 2:
        raise ValueError("n_lambda must be >= 2")
    lam_max = 2.0 * np.max(np.abs(data.predictors.T @ data.response))
    return np.geomspace(lam_max, lam_max * lambda_min_ratio, n_lambda)


def default_lambda_min_ratio(n: int, p: int) -> float:
    return 1e-3 if n > p else 1e-2


def _soft(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def kkt_violation(G: np.ndarray, c: np.ndarray, beta: np.ndarray, lam: float) -> float:
    """Largest violation of the optimality conditions of ||y-Xb||^2 + lam*||b||_1."""
    grad = 2.0 * (c - G @ beta)
    nz = beta != 0
    v_zero = np.max(np.abs(grad[~nz]) - lam, initial=0.0)
    v_nz = np.max(np.abs(grad[nz] - lam * np.sign(beta[nz])), initial=0.0)
    return max(v_zero, v_nz, 0.0)


def _cd_solve(G, c, beta, lam, tol, kkt_tol, max_sweeps):
    """Cyclic coordinate descent from a warm start; updates ``beta`` in place."""
    p = beta.size
    diag = np.diag(G).copy()
    g = c - G @ beta  # half the negative gradient of the squared loss
    half = 0.5 * lam
    sweeps = 0
    full = True
    while sweeps < max_sweeps:
        sweeps += 1
        idx = range(p) if full else np.flatnonzero(beta).tolist()
        delta_max = 0.0
        for j in idx:
            d = diag[j]
            if d <= 0.0:
                continue
            old = beta[j]
            new = _soft(g[j] + d * old, half) / d
            if new != old:
                diff = new - old
                beta[j] = new
                g -= G[:, j] * diff
                if abs(diff) > delta_max:
                    delta_max = abs(diff)
        if delta_max < tol:
            if full:
                g = c - G @ beta
                if kkt_violation(G, c, beta, lam) <= kkt_tol:
                    return sweeps
            full = True
        else:
            full = False
    raise NoConvergence(lam, sweeps)


def lasso_path(
    data: Dataset,
    n_lambda: int = 50,
    lambda_min_ratio: float | None = None,
    *,
    lambdas=None,
    tol: float = 1e-7,
    kkt_tol: float = 1e-7,
    max_sweeps: int = 100_000,
) -> FitSequence:
    """Lasso solutions along a descending penalty grid, with warm starts.

    Solves ``min ||y - X b||^2 + lam * ||b||_1`` (no 1/2n factor), so the
    coordinate update soft-thresholds at ``lam / 2``.
    """
    X, y, p = data.predictors, data.response, data.p
    if lambdas is None:
        if lambda_min_ratio is None:
            lambda_min_ratio = default_lambda_min_ratio(data.n, p)
        lambdas = lambda_grid(data, n_lambda, lambda_min_ratio)
    lambdas = np.asarray(lambdas, dtype=float)
    G = X.T @ X
    c = X.T @ y
    beta = np.zeros(p)
    seq = FitSequence("Lasso")
    for lam in lambdas:
        _cd_solve(G, c, beta, float(lam), tol, kkt_tol, max_sweeps)
        seq.append(np.flatnonzero(beta), {"lambda": float(lam)}, beta.copy(), p)
    return seq


def relaxed_lasso_path(
    data: Dataset,
    n_lambda: int = 50,
    lambda_min_ratio: float | None = None,
    n_gamma: int = 10,
    *,
    lasso: FitSequence | None = None,
) -> FitSequence:
    """Blend of each lasso fit with the LS refit on its active set, over a gamma grid."""
    if n_gamma < 2:
        raise ValueError("n_gamma must be >= 2")
    if lasso is None:
        lasso = lasso_path(data, n_lambda, lambda_min_ratio)
    X, y, p = data.predictors, data.response, data.p
    gammas = np.linspace(0.0, 1.0, n_gamma)
    seq = FitSequence("RelaxedLasso")
    for entry in lasso:
        active = list(entry.active_set)
        b_lasso = entry.coefficients.values
        b_ls = _embed(p, active, min_norm_least_squares(X[:, active], y)) if active else np.zeros(p)
        lam = entry.hyper["lambda"]
        for gam in gammas:
            seq.append(active, {"lambda": lam, "gamma": float(gam)}, gam * b_lasso + (1.0 - gam) * b_ls, p)
    return seq
