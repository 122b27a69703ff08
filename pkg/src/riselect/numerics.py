"""Dense linear-algebra kernels used by the rankers and the fitters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConvergenceFailure, NonPositivePenalty, RankDeficient


@dataclass(frozen=True, eq=False)
class ReducedSvd:
    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    @property
    def rank(self) -> int:
        return self.singular_values.shape[0]


def default_rank_tol(n: int, p: int) -> float:
    return 1e-10 * max(n, p)


def reduced_svd(X: np.ndarray, rank_tol: float | None = None) -> ReducedSvd:
    """Thin SVD truncated to the numerical rank.

    Singular values at or below ``rank_tol * s_max`` are dropped.  The
    default tolerance is ``1e-10 * max(n, p)``.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if rank_tol is None:
        rank_tol = default_rank_tol(n, p)
    try:
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if s.size == 0 or s[0] == 0.0:
        return ReducedSvd(np.zeros((n, 0)), np.zeros(0), np.zeros((p, 0)))
    r = int(np.count_nonzero(s > rank_tol * s[0]))
    return ReducedSvd(U[:, :r], s[:r], Vt[:r].T)


def inv_sqrt_gram(X: np.ndarray, rank_tol: float | None = None) -> np.ndarray:
    """Symmetric ``(X^T X)^{-1/2}``; raises RankDeficient without full column rank."""
    X = np.asarray(X, dtype=float)
    svd = reduced_svd(X, rank_tol)
    if svd.rank < X.shape[1]:
        raise RankDeficient(f"X has rank {svd.rank} < p = {X.shape[1]}")
    V = svd.right
    return (V / svd.singular_values) @ V.T


def _check_full_rank(X: np.ndarray) -> None:
    n, k = X.shape
    if k > n:
        raise RankDeficient(f"{k} columns but only {n} rows")
    s = np.linalg.svd(X, compute_uv=False)
    if s.size and s[-1] <= default_rank_tol(n, k) * s[0]:
        raise RankDeficient(f"submatrix with {k} columns is numerically singular")


def least_squares(X_sub: np.ndarray, y: np.ndarray) -> np.ndarray:
    """LS coefficients on the columns of ``X_sub`` (full column rank required)."""
    X_sub = np.asarray(X_sub, dtype=float)
    if X_sub.shape[1] == 0:
        return np.zeros(0)
    _check_full_rank(X_sub)
    Q, R = np.linalg.qr(X_sub)
    return np.linalg.solve(R, Q.T @ y)


def min_norm_least_squares(X_sub: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pseudo-inverse LS solution; accepts rank-deficient ``X_sub``."""
    X_sub = np.asarray(X_sub, dtype=float)
    if X_sub.shape[1] == 0:
        return np.zeros(0)
    svd = reduced_svd(X_sub)
    return svd.right @ ((svd.left.T @ y) / svd.singular_values)


def ridge_solve(X_sub: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    if not lam > 0:
        raise NonPositivePenalty(f"ridge penalty must be > 0, got {lam}")
    X_sub = np.asarray(X_sub, dtype=float)
    k = X_sub.shape[1]
    if k == 0:
        return np.zeros(0)
    return np.linalg.solve(X_sub.T @ X_sub + lam * np.eye(k), X_sub.T @ y)


def ridge_path(X_sub: np.ndarray, y: np.ndarray, lambdas) -> np.ndarray:
    """Ridge solutions for every penalty in ``lambdas``; returns (len(lambdas), k).

    One eigendecomposition of the Gram matrix serves the whole grid.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(~(lambdas > 0)):
        raise NonPositivePenalty(f"ridge penalties must be > 0, got {lambdas}")
    X_sub = np.asarray(X_sub, dtype=float)
    k = X_sub.shape[1]
    if k == 0:
        return np.zeros((lambdas.size, 0))
    w, V = np.linalg.eigh(X_sub.T @ X_sub)
    w = np.maximum(w, 0.0)
    c = V.T @ (X_sub.T @ y)
    return (c / (w + lambdas[:, None])) @ V.T


def r_squared(X_sub: np.ndarray, y: np.ndarray) -> float:
    """``||P y||^2`` for the projection onto span(X_sub); 0 for an empty subset.

    Rank-deficient subsets are projected through their reduced SVD.
    """
    X_sub = np.asarray(X_sub, dtype=float)
    if X_sub.ndim == 1:
        X_sub = X_sub[:, None]
    if X_sub.shape[1] == 0:
        return 0.0
    svd = reduced_svd(X_sub)
    return float(np.sum((svd.left.T @ y) ** 2))


def batched_pinv_sqrt(G: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Symmetric pseudo-inverse square roots of a stack of PSD matrices.

    ``G`` has shape (m, k, k).  For each slice returns ``W`` with
    ``W @ W = pinv(G)`` where eigenvalues at or below ``rel_tol * max`` are
    treated as zero, so ``||W b||^2 = b^T G^+ b``.
    """
    w, V = np.linalg.eigh(G)
    top = np.maximum(w[:, -1:], 0.0)
    keep = w > rel_tol * top
    inv_root = np.where(keep, 1.0 / np.sqrt(np.where(keep, w, 1.0)), 0.0)
    return (V * inv_root[:, None, :]) @ np.swapaxes(V, 1, 2)


class SubsetGram:
    """Per-subset whitening of a fixed Gram matrix for exhaustive enumeration.

    For every subset ``S`` of a given size the pseudo-inverse square root of
    ``G[S, S]`` is cached, so the explained sum of squares
    ``b_S^T G_S^+ b_S`` for any ``b = X^T y`` costs one small mat-vec.  With
    unit-norm ``y`` this is R^2 of the projection of ``y`` onto span(X_S).
    Subsets of size k are held in lexicographic order.
    """

    def __init__(self, gram: np.ndarray, rel_tol: float = 1e-10, chunk: int = 20000):
        self.gram = np.asarray(gram, dtype=float)
        self.p = self.gram.shape[0]
        self.rel_tol = rel_tol
        self.chunk = chunk
        self._subsets: dict[int, np.ndarray] = {}
        self._roots: dict[int, np.ndarray] = {}

    def subsets(self, k: int) -> np.ndarray:
        if k not in self._subsets:
            from itertools import combinations

            combos = np.array(list(combinations(range(self.p), k)), dtype=np.intp)
            self._subsets[k] = combos.reshape(-1, k)
        return self._subsets[k]

    def roots(self, k: int) -> np.ndarray:
        if k not in self._roots:
            idx = self.subsets(k)
            parts = []
            for lo in range(0, idx.shape[0], self.chunk):
                sub = idx[lo : lo + self.chunk]
                parts.append(batched_pinv_sqrt(self.gram[sub[:, :, None], sub[:, None, :]], self.rel_tol))
            self._roots[k] = np.concatenate(parts) if parts else np.zeros((0, k, k))
        return self._roots[k]

    def explained(self, k: int, b: np.ndarray) -> np.ndarray:
        """Explained sum of squares of every size-k subset.

        ``b`` may be a vector (p,) giving shape (C(p,k),) or a batch (B, p)
        giving shape (B, C(p,k)).
        """
        b = np.asarray(b, dtype=float)
        idx = self.subsets(k)
        if k == 0:
            return np.zeros(b.shape[:-1] + (1,))
        W = self.roots(k)
        if b.ndim == 1:
            return np.sum(np.einsum("mij,mj->mi", W, b[idx]) ** 2, axis=1)
        out = np.empty((b.shape[0], idx.shape[0]))
        step = max(1, self.chunk // max(1, b.shape[0]) * 4)
        for lo in range(0, idx.shape[0], step):
            sl = slice(lo, lo + step)
            bs = b[:, idx[sl]]
            out[:, sl] = np.sum(np.einsum("mij,bmj->bmi", W[sl], bs) ** 2, axis=2)
        return out
