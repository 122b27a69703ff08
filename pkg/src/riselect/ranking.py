"""Predictor importance scores: SIS, general dominance, CRI and CRI.Z."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .core import Dataset, TooManyPredictors
from .numerics import SubsetGram, reduced_svd

METHODS = ("SIS", "GD", "CRI", "CRIZ")


@dataclass(frozen=True, eq=False)
class RankingResult:
    """Scores per predictor and the induced order.

    ``order`` lists 0-based predictor indices by descending score (by
    descending absolute score for SIS), ties going to the lower index.
    """

    method: str
    scores: np.ndarray
    order: np.ndarray

    def top(self, k: int) -> np.ndarray:
        return self.order[:k]

    def to_dict(self, names=None) -> dict:
        d = {
            "method": self.method,
            "scores": [float(s) for s in self.scores],
            "order": [int(i) + 1 for i in self.order],
        }
        if names is not None:
            d["predictors"] = list(names)
        return d


def order_by_score(scores: np.ndarray) -> np.ndarray:
    """Descending order, ties broken by ascending index."""
    scores = np.asarray(scores, dtype=float)
    # lexsort sorts by the last key first
    return np.lexsort((np.arange(scores.size), -scores))


def _result(method: str, scores: np.ndarray, key: np.ndarray | None = None) -> RankingResult:
    scores = np.array(scores, dtype=float)
    order = order_by_score(scores if key is None else key)
    scores.setflags(write=False)
    order.setflags(write=False)
    return RankingResult(method, scores, order)


def rank_sis(data: Dataset) -> RankingResult:
    rho = data.predictors.T @ data.response
    return _result("SIS", rho, key=np.abs(rho))


def subset_r2_table(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """R^2 of every subset, indexed by bitmask (bit i set <=> predictor i in S).

    Collinear subsets are handled with pseudo-inverse projections.
    """
    p = X.shape[1]
    enum = SubsetGram(X.T @ X)
    b = X.T @ y
    table = np.zeros(1 << p)
    for k in range(1, p + 1):
        masks = np.sum(np.left_shift(1, enum.subsets(k)), axis=1)
        table[masks] = enum.explained(k, b)
    return table


def shapley_from_table(table: np.ndarray, p: int) -> np.ndarray:
    """Shapley values of the set function stored in ``table`` (bitmask-indexed)."""
    masks = np.arange(1 << p)
    sizes = _popcount(masks)
    # weight of a coalition S of size s not containing i: 1 / (p * C(p-1, s))
    w_by_size = np.array([1.0 / (p * comb(p - 1, s)) for s in range(p)])
    out = np.empty(p)
    for i in range(p):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        gains = table[without | bit] - table[without]
        out[i] = np.sum(w_by_size[sizes[without]] * gains)
    return out


def _popcount(masks: np.ndarray) -> np.ndarray:
    counts = np.zeros_like(masks)
    m = masks.copy()
    while np.any(m):
        counts += m & 1
        m >>= 1
    return counts


def rank_gd(data: Dataset, max_p: int = 20) -> RankingResult:
    """General dominance by exact enumeration of all 2^p sub-models."""
    p = data.p
    if p > max_p:
        raise TooManyPredictors(p, max_p, "general dominance")
    table = subset_r2_table(data.predictors, data.response)
    return _result("GD", shapley_from_table(table, p))


def _rotated_response(data: Dataset, rank_tol: float | None):
    svd = reduced_svd(data.predictors, rank_tol)
    w = svd.right @ (svd.left.T @ data.response)
    return svd, w


def rank_cri(data: Dataset, rank_tol: float | None = None) -> RankingResult:
    svd, w = _rotated_response(data, rank_tol)
    root = (svd.right * svd.singular_values) @ svd.right.T
    scores = (root * root) @ (w * w)
    return _result("CRI", scores)


def rank_criz(data: Dataset, rank_tol: float | None = None) -> RankingResult:
    _, w = _rotated_response(data, rank_tol)
    return _result("CRIZ", w * w)


_ALIASES = {"sis": "SIS", "gd": "GD", "cri": "CRI", "criz": "CRIZ", "car": "CRIZ", "cri.z": "CRIZ"}


def canonical_measure(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown ranking measure {name!r}") from None


def rank(data: Dataset, method: str, *, max_p: int = 20, rank_tol: float | None = None) -> RankingResult:
    m = canonical_measure(method)
    if m == "SIS":
        return rank_sis(data)
    if m == "GD":
        return rank_gd(data, max_p)
    if m == "CRI":
        return rank_cri(data, rank_tol)
    return rank_criz(data, rank_tol)
