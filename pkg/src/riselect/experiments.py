"""Experiment configuration, orchestration and result emission."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .core import RngStream, TooManyPredictors, standardize
from .evaluation import (
    FitOptions,
    MetricRecord,
    edf_study,
    metric_f1,
    metric_pr_k,
    metric_rte,
    metric_s,
    tune_on_validation,
)
from .methods import ENUMERATING, FITTERS, RANKERS, RankingCache, fit_method, normalize_method
from .simgen import (
    PART1_EXAMPLES,
    PART1_RHOS,
    PART1_SNRS,
    PART2_EXAMPLES,
    PART2_RHOS,
    PART2_SNRS,
    SETTINGS,
    SimDesign,
    design_grid,
    draw_instance,
    make_design,
)
from .selection import PenaltyGrid

log = logging.getLogger("riselect")

PARTS = ("part1", "part2", "edf")
RECORD_HEADER = ["design_id", "example", "setting", "rho", "snr", "rep", "method", "metric", "k", "value"]
AGGREGATE_HEADER = ["design_id", "example", "setting", "rho", "snr", "method", "metric", "k", "n", "mean", "stderr"]
THREADS_ENV = "RI_SELECT_THREADS"

EDF_DEFAULTS = {"example": 4, "n": 70, "p": 30, "s": 5, "rho": 0.35, "snr": 0.7}


@dataclass
class ExperimentConfig:
    """Fully resolved settings of one experiment run.

    ``None`` fields are filled by :meth:`resolve` from the part and setting;
    the resolved form is what ``config.json`` echoes and parses back.
    """

    part: str
    setting: str = "low"
    examples: list | None = None
    rho_list: list | None = None
    snr_list: list | None = None
    methods: list | None = None
    replications: int | None = None
    base_seed: int = 0
    k_max: int | None = None
    ridge_grid: dict | None = None
    lasso: dict | None = None
    max_p: int = 20
    output_dir: str = "results"
    n: int | None = None
    p: int | None = None
    s: int | None = None
    n_test: int | None = None
    n_draws: int = 500
    bs_k_max: int | None = None
    rte_plus_one: bool = False

    def resolve(self) -> "ExperimentConfig":
        c = ExperimentConfig(**asdict(self))
        c.part = c.part.lower()
        if c.part not in PARTS:
            raise ValueError(f"part must be one of {PARTS}, got {c.part!r}")
        if c.part == "edf":
            c.setting = "custom"
            c.examples = c.examples or [EDF_DEFAULTS["example"]]
            c.n = c.n or EDF_DEFAULTS["n"]
            c.p = c.p or EDF_DEFAULTS["p"]
            c.s = c.s or EDF_DEFAULTS["s"]
            c.rho_list = c.rho_list or [EDF_DEFAULTS["rho"]]
            c.snr_list = c.snr_list or [EDF_DEFAULTS["snr"]]
            c.methods = c.methods or ["bs", "fs", "ls-sis", "ls-cri", "ls-criz", "lasso"]
            c.replications = c.replications or 1
            c.k_max = c.k_max if c.k_max is not None else min(c.n - 1, c.p)
            c.bs_k_max = c.bs_k_max if c.bs_k_max is not None else 6
        else:
            if c.setting not in SETTINGS:
                raise ValueError(f"setting must be one of {tuple(SETTINGS)}, got {c.setting!r}")
            n, p = SETTINGS[c.setting]
            c.n, c.p = n, p
            low = c.setting == "low"
            if c.part == "part1":
                c.examples = c.examples or list(PART1_EXAMPLES)
                c.rho_list = c.rho_list or list(PART1_RHOS)
                c.snr_list = c.snr_list or list(PART1_SNRS)
                c.methods = c.methods or (["sis", "gd", "cri", "criz"] if low else ["sis", "cri", "criz"])
                c.replications = c.replications or 100
            else:
                c.examples = c.examples or list(PART2_EXAMPLES)
                c.rho_list = c.rho_list or list(PART2_RHOS)
                c.snr_list = c.snr_list or list(PART2_SNRS)
                c.methods = c.methods or (
                    ["bs", "fs", "lasso", "rlasso", "ls-sis", "ls-gd", "ls-cri", "ls-criz", "ridge-criz"]
                    if low
                    else ["fs", "lasso", "rlasso", "ls-sis", "ls-cri", "ls-criz", "ridge-criz"]
                )
                c.replications = c.replications or 30
                c.s = 10 if c.setting == "high-100" else 5
            c.k_max = c.k_max if c.k_max is not None else (10 if low else 50)
        grid = dict(c.ridge_grid or {})
        grid.setdefault("count", 10 if c.setting == "low" else 20)
        grid.setdefault("lambda_max", 1e3)
        grid.setdefault("lambda_min", 1e-4)
        c.ridge_grid = grid
        lasso = dict(c.lasso or {})
        lasso.setdefault("n_lambda", 50)
        lasso.setdefault("lambda_min_ratio", 1e-3 if c.n > c.p else 1e-2)
        lasso.setdefault("n_gamma", 10)
        c.lasso = lasso
        c.examples = [int(e) for e in c.examples]
        c.rho_list = [float(r) for r in c.rho_list]
        c.snr_list = [float(s) for s in c.snr_list]
        c.methods = [m.strip().lower() for m in c.methods]
        return c

    def validate(self) -> None:
        """Reject bad configurations before any computation starts."""
        if self.replications is None or self.replications < 1:
            raise ValueError("replications must be >= 1")
        for m in self.methods:
            normalize_method(m)
        allowed = RANKERS if self.part == "part1" else FITTERS
        bad = [m for m in self.methods if m not in allowed]
        if bad:
            raise ValueError(f"methods {bad} are not available for {self.part}")
        for m in self.methods:
            if normalize_method(m) in ENUMERATING and self.p > self.max_p:
                if m == "bs" and self.bs_k_max is not None:
                    continue
                raise TooManyPredictors(self.p, self.max_p, f"method {m!r}")
        if self.part == "edf" and self.n_draws < 100:
            raise ValueError("n_draws must be >= 100")
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")

    def fit_options(self) -> FitOptions:
        return FitOptions(
            k_max=self.k_max,
            ridge_grid=PenaltyGrid.log_spaced(
                int(self.ridge_grid["count"]), float(self.ridge_grid["lambda_max"]),
                float(self.ridge_grid["lambda_min"])),
            n_lambda=int(self.lasso["n_lambda"]),
            lambda_min_ratio=float(self.lasso["lambda_min_ratio"]),
            n_gamma=int(self.lasso["n_gamma"]),
            max_p=self.max_p,
            bs_k_max=self.bs_k_max,
        )

    def designs(self) -> list[SimDesign]:
        if self.part == "edf":
            return [make_design(ex, self.n, self.p, rho, snr, self.s, "custom", "edf", self.n_test)
                    for ex in self.examples for rho in self.rho_list for snr in self.snr_list]
        grid = design_grid(self.part, self.setting, self.examples, self.rho_list, self.snr_list)
        if self.n_test is not None:
            grid = [replace(d, n_test=self.n_test) for d in grid]
        return grid

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    config: ExperimentConfig | None = None

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=MetricRecord.sort_key)

    def aggregates(self) -> list[dict]:
        return aggregate_records(self.sorted_rows())


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def aggregate_records(rows) -> list[dict]:
    """Mean and standard error per (design, method, metric, k)."""
    groups: dict[tuple, dict] = {}
    for r in rows:
        key = (r.design_id, r.method, r.metric, r.k)
        g = groups.setdefault(key, {"row": r, "values": []})
        g["values"].append(r.value)
    out = []
    def order(item):
        design_id, method, metric, k = item[0]
        return design_id, method, metric, -1 if k is None else k

    for (design_id, method, metric, k), g in sorted(groups.items(), key=order):
        mean, se = _mean_stderr(g["values"])
        r = g["row"]
        out.append({"design_id": design_id, "example": r.example, "setting": r.setting, "rho": r.rho,
                    "snr": r.snr, "method": method, "metric": metric, "k": k, "n": len(g["values"]),
                    "mean": mean, "stderr": se})
    return out


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _record_fields(r: MetricRecord) -> list:
    return [r.design_id, r.example, r.setting, repr(float(r.rho)), repr(float(r.snr)), r.rep, r.method,
            r.metric, "" if r.k is None else r.k, _fmt(r.value)]


def records_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_HEADER)
    for r in rows:
        w.writerow(_record_fields(r))
    return buf.getvalue()


def aggregates_csv(aggs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_HEADER)
    for a in aggs:
        w.writerow([a["design_id"], a["example"], a["setting"], repr(float(a["rho"])), repr(float(a["snr"])),
                    a["method"], a["metric"], "" if a["k"] is None else a["k"], a["n"], _fmt(a["mean"]),
                    _fmt(a["stderr"])])
    return buf.getvalue()


def emit(table: ResultTable, out_dir) -> dict:
    """Write records.csv, aggregates.csv and config.json; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = table.sorted_rows()
    paths = {"records": out / "records.csv", "aggregates": out / "aggregates.csv"}
    with open(paths["records"], "w", encoding="utf-8", newline="") as fh:
        fh.write(records_csv(rows))
    with open(paths["aggregates"], "w", encoding="utf-8", newline="") as fh:
        fh.write(aggregates_csv(aggregate_records(rows)))
    if table.config is not None:
        paths["config"] = out / "config.json"
        with open(paths["config"], "w", encoding="utf-8", newline="") as fh:
            fh.write(table.config.to_json())
    return paths


def read_records(path) -> list[MetricRecord]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for d in csv.DictReader(fh):
            rows.append(MetricRecord(d["design_id"], int(d["rep"]), d["method"], d["metric"], float(d["value"]),
                                     None if d["k"] == "" else int(d["k"]), int(d["example"]), d["setting"],
                                     float(d["rho"]), float(d["snr"])))
    return rows


# ---------------------------------------------------------------------------
# per-replication work


def _context(design: SimDesign) -> dict:
    return {"example": design.example, "setting": design.setting, "rho": design.rho, "snr": design.snr}


def part1_task(config: ExperimentConfig, design: SimDesign, rep: int) -> list[MetricRecord]:
    stream = RngStream.for_task(config.base_seed, design.design_id, rep)
    inst = draw_instance(design, stream)
    data = standardize(inst.train)
    support = inst.beta0.support
    rankings = RankingCache(data, config.max_p)
    ctx = _context(design)
    rows = []
    k_top = min(config.k_max, data.p)
    for label in config.methods:
        ranking = rankings[normalize_method(label)]
        rows.append(MetricRecord(design.design_id, rep, label, "S", float(metric_s(ranking, support)), None, **ctx))
        for k in range(1, k_top + 1):
            rows.append(MetricRecord(design.design_id, rep, label, "PrK", metric_pr_k(ranking, support, k), k, **ctx))
    return rows


def part2_task(config: ExperimentConfig, design: SimDesign, rep: int) -> list[MetricRecord]:
    stream = RngStream.for_task(config.base_seed, design.design_id, rep)
    inst = draw_instance(design, stream)
    data = standardize(inst.train)
    opts = config.fit_options()
    rankings = RankingCache(data, config.max_p)
    cache: dict = {}
    ctx = _context(design)
    rows = []
    for label in config.methods:
        seq = fit_method(label, data, opts, rankings, cache)
        tuned = tune_on_validation(seq, inst.validation, data)
        f1 = metric_f1(tuned.raw_coefficients, inst.beta0)
        rte = metric_rte(tuned.raw_coefficients, inst.beta0, inst.sigma, inst.sigma2, config.rte_plus_one)
        rows.append(MetricRecord(design.design_id, rep, label, "F1", f1, None, **ctx))
        rows.append(MetricRecord(design.design_id, rep, label, "RTE", rte, None, **ctx))
    return rows


def _run_chunk(args):
    fn, config, items = args
    out = []
    for design, rep in items:
        out.extend(fn(config, design, rep))
    return out


def worker_count(requested: int | None = None) -> int:
    if requested is None:
        env = os.environ.get(THREADS_ENV)
        requested = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(requested))


def _run_tasks(fn, config: ExperimentConfig, workers: int | None) -> list[MetricRecord]:
    tasks = [(d, r) for d in config.designs() for r in range(1, config.replications + 1)]
    workers = worker_count(workers)
    log.info("%s: %d designs x %d replications on %d worker(s)", config.part,
             len(tasks) // config.replications, config.replications, workers)
    if workers == 1:
        rows = []
        for i, (d, r) in enumerate(tasks, 1):
            rows.extend(fn(config, d, r))
            if i % 500 == 0:
                log.info("  %d/%d tasks", i, len(tasks))
        return rows
    size = max(1, len(tasks) // (workers * 8))
    chunks = [(fn, config, tasks[i : i + size]) for i in range(0, len(tasks), size)]
    rows = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_run_chunk, chunks):
            rows.extend(part)
    return rows


def _prepare(config: ExperimentConfig, part: str) -> ExperimentConfig:
    config = config.resolve()
    if config.part != part:
        raise ValueError(f"config is for {config.part}, not {part}")
    config.validate()
    for m in config.methods:
        if m == "car":
            log.info("method 'car' is computed as CRI.Z (identical when n > p)")
    return config


def run_part1(config: ExperimentConfig, workers: int | None = None) -> ResultTable:
    config = _prepare(config, "part1")
    return ResultTable(_run_tasks(part1_task, config, workers), config)


def run_part2(config: ExperimentConfig, workers: int | None = None) -> ResultTable:
    config = _prepare(config, "part2")
    return ResultTable(_run_tasks(part2_task, config, workers), config)


def edf_records(config: ExperimentConfig, design: SimDesign, rep: int) -> list[MetricRecord]:
    """EDF, its Monte-Carlo standard error and mean model size for every path point.

    ``k`` is the model size for subset-type paths (``k`` hyperparameter) and
    the 1-based path position otherwise.
    """
    stream = RngStream.for_task(config.base_seed, design.design_id, rep)
    curves = edf_study(design, config.methods, config.n_draws, stream, config.fit_options())
    ctx = _context(design)
    rows = []
    for label in config.methods:
        curve = curves[normalize_method(label)]
        for pos, key in enumerate(curve.keys):
            hyper = dict(key)
            k = hyper["k"] if set(hyper) == {"k"} else pos + 1
            for metric, value in (("EDF", curve.edf[pos]), ("EDF_SE", curve.stderr[pos]),
                                  ("SIZE", curve.mean_size[pos])):
                rows.append(MetricRecord(design.design_id, rep, label, metric, float(value), int(k), **ctx))
    return rows


def run_edf(config: ExperimentConfig, workers: int | None = None) -> ResultTable:
    config = _prepare(config, "edf")
    return ResultTable(_run_tasks(edf_records, config, workers), config)


RUNNERS = {"part1": run_part1, "part2": run_part2, "edf": run_edf}


def check_aggregates(out_dir, tol: float = 1e-12) -> float:
    """Recompute aggregates from records.csv; return the largest discrepancy.

    Raises ValueError if any group is missing or differs by more than ``tol``.
    """
    out = Path(out_dir)
    recomputed = aggregate_records(read_records(out / "records.csv"))
    with open(out / "aggregates.csv", newline="", encoding="utf-8") as fh:
        written = list(csv.DictReader(fh))
    if len(written) != len(recomputed):
        raise ValueError(f"{len(written)} aggregate rows, expected {len(recomputed)}")
    worst = 0.0
    for w, a in zip(written, recomputed):
        if (w["design_id"], w["method"], w["metric"]) != (a["design_id"], a["method"], a["metric"]):
            raise ValueError(f"aggregate row mismatch at {w}")
        for name in ("mean", "stderr"):
            worst = max(worst, abs(float(w[name]) - a[name]))
    if worst > tol:
        raise ValueError(f"aggregates differ from records by {worst:g}")
    return worst


__all__ = [
    "ExperimentConfig",
    "ResultTable",
    "emit",
    "run_part1",
    "run_part2",
    "run_edf",
    "check_aggregates",
    "read_records",
    "records_csv",
    "aggregate_records",
]
