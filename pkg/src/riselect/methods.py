"""Method labels and dispatch from a label to a fitted model sequence."""

from __future__ import annotations

from dataclasses import dataclass

from .core import Dataset
from .ranking import RankingResult, canonical_measure, rank
from .selection import (
    FitSequence,
    PenaltyGrid,
    best_subset,
    default_lambda_min_ratio,
    fit_ls_ri,
    fit_ridge_ri,
    forward_stepwise,
    lasso_path,
    relaxed_lasso_path,
)

RANKERS = ("sis", "gd", "cri", "criz", "car")
FITTERS = ("ls-sis", "ls-gd", "ls-cri", "ls-criz", "ridge-criz", "ridge-cri", "fs", "bs", "lasso", "rlasso")
REGISTERED = RANKERS + FITTERS
# methods that enumerate subsets and are capped by max_p
ENUMERATING = {"gd", "ls-gd", "bs"}


def normalize_method(label: str) -> str:
    """Lower-case label with ``car`` folded into ``criz``."""
    m = label.strip().lower()
    if m not in REGISTERED:
        raise ValueError(f"unknown method {label!r}; choose from {', '.join(REGISTERED)}")
    return "criz" if m == "car" else m


def measure_of(method: str) -> str | None:
    """Ranking measure a method needs, or None."""
    if method in RANKERS:
        return canonical_measure(method)
    if method.startswith(("ls-", "ridge-")):
        return canonical_measure(method.split("-", 1)[1])
    return None


@dataclass
class FitOptions:
    k_max: int = 10
    ridge_grid: PenaltyGrid | None = None
    n_lambda: int = 50
    lambda_min_ratio: float | None = None
    n_gamma: int = 10
    max_p: int = 20
    rank_tol: float | None = None
    lambdas: object = None  # explicit lasso penalties, overriding n_lambda/ratio
    # caps best-subset size; when set, enumeration is bounded by C(p, bs_k_max)
    # and the p <= max_p guard no longer applies to best subset
    bs_k_max: int | None = None


class RankingCache:
    """Computes each ranking measure at most once per dataset."""

    def __init__(self, data: Dataset, max_p: int = 20, rank_tol: float | None = None):
        self.data = data
        self.max_p = max_p
        self.rank_tol = rank_tol
        self._cache: dict[str, RankingResult] = {}

    def __getitem__(self, measure: str) -> RankingResult:
        m = canonical_measure(measure)
        if m not in self._cache:
            self._cache[m] = rank(self.data, m, max_p=self.max_p, rank_tol=self.rank_tol)
        return self._cache[m]

    def computed(self) -> list[str]:
        return list(self._cache)


def fit_method(method: str, data: Dataset, opts: FitOptions, rankings: RankingCache | None = None,
               cache: dict | None = None) -> FitSequence:
    """Fit the model sequence for one method label.

    ``cache`` lets ``lasso`` and ``rlasso`` share one coordinate-descent path.
    """
    method = normalize_method(method)
    if rankings is None:
        rankings = RankingCache(data, opts.max_p, opts.rank_tol)
    cache = {} if cache is None else cache
    k_max = min(opts.k_max, data.n - 1, data.p)
    if method.startswith("ls-"):
        return fit_ls_ri(data, rankings[measure_of(method)], k_max, label=method)
    if method.startswith("ridge-"):
        grid = opts.ridge_grid or PenaltyGrid.log_spaced(10)
        return fit_ridge_ri(data, rankings[measure_of(method)], k_max, grid, label=method)
    if method == "fs":
        return forward_stepwise(data, k_max)
    if method == "bs":
        if opts.bs_k_max is None:
            return best_subset(data, k_max, opts.max_p, enumerator=cache.get("enumerator"))
        return best_subset(data, min(k_max, opts.bs_k_max), max(opts.max_p, data.p),
                           enumerator=cache.get("enumerator"))
    if method in ("lasso", "rlasso"):
        if "lasso" not in cache:
            ratio = opts.lambda_min_ratio or default_lambda_min_ratio(data.n, data.p)
            cache["lasso"] = lasso_path(data, opts.n_lambda, ratio, lambdas=opts.lambdas)
        if method == "lasso":
            return cache["lasso"]
        return relaxed_lasso_path(data, n_gamma=opts.n_gamma, lasso=cache["lasso"])
    raise ValueError(f"{method!r} is a ranking, not a fitting method")
