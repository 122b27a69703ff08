"""Shared data model, standardization and the seeded random-stream contract."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


class RiSelectError(Exception):
    """Base class for all package errors."""


class ConstantColumn(RiSelectError, ValueError):
    def __init__(self, index: int):
        # index is 0-based internally; -1 denotes the response
        self.index = index
        what = "response" if index < 0 else f"predictor column {index + 1}"
        super().__init__(f"{what} has zero variance")


class NonFinite(RiSelectError, ValueError):
    pass


class DimensionMismatch(RiSelectError, ValueError):
    pass


class RankDeficient(RiSelectError, np.linalg.LinAlgError):
    pass


class ConvergenceFailure(RiSelectError, np.linalg.LinAlgError):
    pass


class NonPositivePenalty(RiSelectError, ValueError):
    pass


class TooManyPredictors(RiSelectError, ValueError):
    def __init__(self, p: int, max_p: int, what: str = "exhaustive enumeration"):
        self.p = p
        self.max_p = max_p
        super().__init__(f"{what} needs p <= {max_p}, got p = {p}")


class NotPositiveSemidefinite(RiSelectError, ValueError):
    pass


class PatternInfeasible(RiSelectError, ValueError):
    pass


class NoConvergence(RiSelectError, RuntimeError):
    def __init__(self, lam: float, sweeps: int):
        self.lam = lam
        self.sweeps = sweeps
        super().__init__(f"coordinate descent did not converge at lambda={lam:g} after {sweeps} sweeps")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RawData:
    """Predictors and response on their original scale."""

    predictors: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.predictors, dtype=float))
        y = np.asarray(self.response, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} predictor rows but {y.shape[0]} responses")
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise DimensionMismatch(f"need n >= 2 and p >= 1, got shape {X.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise NonFinite("input contains NaN or Inf")
        object.__setattr__(self, "predictors", _frozen(X))
        object.__setattr__(self, "response", _frozen(y))

    @property
    def n(self) -> int:
        return self.predictors.shape[0]

    @property
    def p(self) -> int:
        return self.predictors.shape[1]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Standardized predictors and response plus the mapping back to raw scale.

    Each predictor column and the response are centered and scaled to unit
    Euclidean norm.  ``centers_x``/``scales_x`` and ``center_y``/``scale_y``
    hold the raw means and the norms of the centered raw columns.
    """

    predictors: np.ndarray
    response: np.ndarray
    centers_x: np.ndarray
    scales_x: np.ndarray
    center_y: float = 0.0
    scale_y: float = 1.0

    def __post_init__(self):
        for name in ("predictors", "response", "centers_x", "scales_x"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "center_y", float(self.center_y))
        object.__setattr__(self, "scale_y", float(self.scale_y))

    @property
    def n(self) -> int:
        return self.predictors.shape[0]

    @property
    def p(self) -> int:
        return self.predictors.shape[1]

    @classmethod
    def fixed_design(cls, predictors: np.ndarray, response: np.ndarray) -> "Dataset":
        """Wrap an already standardized X with a response kept on its own scale.

        Used where X is held fixed and the fitting procedure must act on
        ``y`` directly (noise-refit studies), so no centering or scaling of
        the response is applied.
        """
        X = np.asarray(predictors, dtype=float)
        return cls(X, np.asarray(response, dtype=float), np.zeros(X.shape[1]), np.ones(X.shape[1]))

    def with_response(self, response: np.ndarray) -> "Dataset":
        return Dataset(self.predictors, response, self.centers_x, self.scales_x, self.center_y, self.scale_y)

    def to_raw_coefficients(self, beta: np.ndarray) -> tuple[np.ndarray, float]:
        """Map standardized-space coefficients to (slopes, intercept) on raw scale."""
        slopes = self.scale_y * np.asarray(beta, dtype=float) / self.scales_x
        intercept = self.center_y - float(self.centers_x @ slopes)
        return slopes, intercept

    def predict_raw(self, X_raw: np.ndarray, beta: np.ndarray) -> np.ndarray:
        """Predict raw-scale responses for raw predictors; ``beta`` may be (m, p)."""
        Z = (np.asarray(X_raw, dtype=float) - self.centers_x) / self.scales_x
        return self.center_y + self.scale_y * (Z @ np.asarray(beta, dtype=float).T)


def standardize(raw: RawData, tol: float = 1e-12) -> Dataset:
    """Center every column and the response, then scale each to unit l2-norm.

    A column counts as constant when its centered norm is below
    ``tol`` times its raw magnitude (or exactly zero).
    """
    if not isinstance(raw, RawData):
        raw = RawData(*raw)
    X, y = raw.predictors, raw.response
    cx = X.mean(axis=0)
    Xc = X - cx
    sx = np.linalg.norm(Xc, axis=0)
    mag = np.maximum(np.abs(X).max(axis=0), 1.0)
    bad = np.flatnonzero(sx <= tol * mag)
    if bad.size:
        raise ConstantColumn(int(bad[0]))
    cy = y.mean()
    yc = y - cy
    sy = np.linalg.norm(yc)
    if sy <= tol * max(np.abs(y).max(), 1.0):
        raise ConstantColumn(-1)
    return Dataset(Xc / sx, yc / sy, cx, sx, cy, sy)


@dataclass(frozen=True)
class CoefficientVector:
    values: np.ndarray
    support: tuple = field(init=False)

    def __post_init__(self):
        v = _frozen(self.values).ravel()
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "support", tuple(int(i) for i in np.flatnonzero(v)))

    @classmethod
    def zeros(cls, p: int) -> "CoefficientVector":
        return cls(np.zeros(p))

    @classmethod
    def on_support(cls, p: int, indices, sub_values) -> "CoefficientVector":
        v = np.zeros(p)
        v[list(indices)] = sub_values
        return cls(v)

    def __eq__(self, other):
        if not isinstance(other, CoefficientVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class ActiveSet:
    """Ordered distinct predictor indices (0-based); ``one_based`` for I/O."""

    indices: tuple
    p: int | None = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate indices in active set {idx}")
        if any(i < 0 for i in idx) or (self.p is not None and any(i >= self.p for i in idx)):
            raise ValueError(f"active set {idx} out of range for p={self.p}")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def one_based(self) -> list[int]:
        return [i + 1 for i in self.indices]


_MASK64 = (1 << 64) - 1


def stable_hash64(*parts) -> int:
    """Platform-independent 64-bit hash of the string forms of ``parts``."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RngStream:
    """A (base_seed, stream_id) pair naming an independent Philox stream.

    Streams are values: ``child`` derives a sub-stream deterministically and
    ``generator`` builds a fresh numpy Generator positioned at the start of
    the stream, so the same pair always reproduces the same draws.
    """

    base_seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "base_seed", int(self.base_seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([self.base_seed, self.stream_id])
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *labels) -> "RngStream":
        return RngStream(self.base_seed, stable_hash64(self.stream_id, *labels))

    @classmethod
    def for_task(cls, base_seed: int, design_id: str, replication: int) -> "RngStream":
        return cls(base_seed, stable_hash64(design_id, int(replication)))


def gaussian_vector(stream: RngStream, length: int) -> np.ndarray:
    """Standard normal draws, fully determined by the stream."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return stream.generator().standard_normal(int(length))
