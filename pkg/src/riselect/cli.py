"""Command-line entry point: ``riselect {rank,select,part1,part2,edf}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .core import RawData, RiSelectError, standardize
from .evaluation import tune_on_validation
from .experiments import RUNNERS, ExperimentConfig, emit, records_csv
from .methods import FITTERS, RANKERS, FitOptions, RankingCache, fit_method, normalize_method
from .selection import PenaltyGrid

log = logging.getLogger("riselect")


def read_dataset(path) -> tuple[RawData, list[str]]:
    """Read a CSV with a header row; first column is the response."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(c) for c in row] for row in reader if row]
    if len(header) < 2:
        raise ValueError(f"{path}: need a response column and at least one predictor")
    a = np.array(rows, dtype=float)
    return RawData(a[:, 1:], a[:, 0]), header[1:]


def _write_json(obj, out) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_rank(args) -> int:
    raw, names = read_dataset(args.data)
    method = normalize_method(args.method)
    if method not in RANKERS:
        raise ValueError(f"rank needs one of {', '.join(RANKERS)}")
    if args.method.lower() == "car":
        log.info("method 'car' is computed as CRI.Z")
    result = RankingCache(standardize(raw), args.max_p)[method]
    _write_json(result.to_dict(names), args.out)
    return 0


def cmd_select(args) -> int:
    raw, names = read_dataset(args.data)
    method = normalize_method(args.method)
    if method not in FITTERS:
        raise ValueError(f"select needs one of {', '.join(FITTERS)}")
    data = standardize(raw)
    opts = FitOptions(
        k_max=min(args.k_max, data.n - 1, data.p),
        ridge_grid=PenaltyGrid.log_spaced(args.ridge_count),
        n_lambda=args.n_lambda,
        n_gamma=args.n_gamma,
        max_p=args.max_p,
    )
    seq = fit_method(method, data, opts)
    if args.validation:
        val, val_names = read_dataset(args.validation)
        if val_names != names:
            raise ValueError("validation file columns differ from the training file")
        _write_json(tune_on_validation(seq, val, data).to_dict(names), args.out)
    else:
        d = seq.to_dict()
        d["predictors"] = names
        _write_json(d, args.out)
    return 0


def _split_list(text, cast=str):
    return [cast(t) for t in text.split(",") if t.strip()]


def build_config(args) -> ExperimentConfig:
    if args.config:
        d = json.loads(Path(args.config).read_text(encoding="utf-8"))
        d["part"] = args.command
    else:
        missing = [flag for flag, v in (("--seed", args.seed), ("--reps", args.reps),
                                        ("--methods", args.methods), ("--out", args.out)) if v is None]
        if missing:
            raise SystemExit(f"riselect {args.command}: without --config these flags are required: "
                             + ", ".join(missing))
        d = {"part": args.command}
    overrides = {
        "base_seed": args.seed,
        "replications": args.reps,
        "methods": _split_list(args.methods) if args.methods else None,
        "output_dir": args.out,
        "setting": args.setting,
        "examples": _split_list(args.examples, int) if args.examples else None,
        "rho_list": _split_list(args.rho, float) if args.rho else None,
        "snr_list": _split_list(args.snr, float) if args.snr else None,
        "k_max": args.k_max,
        "max_p": args.max_p,
        "n_draws": getattr(args, "n_draws", None),
        "rte_plus_one": True if getattr(args, "rte_plus_one", False) else None,
    }
    d.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(d).resolve()


def cmd_experiment(args) -> int:
    config = build_config(args)
    table = RUNNERS[args.command](config, workers=args.workers)
    paths = emit(table, config.output_dir)
    for name, path in paths.items():
        log.info("wrote %s: %s", name, path)
    if args.stdout:
        sys.stdout.write(records_csv(table.sorted_rows()))
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riselect", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rank", help="rank the predictors of a CSV dataset")
    p.add_argument("data", help="CSV file, header row, response in the first column")
    p.add_argument("--method", default="criz", help="sis, gd, cri, criz or car")
    p.add_argument("--max-p", type=int, default=20)
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("select", help="fit a model sequence and optionally tune it on a validation CSV")
    p.add_argument("data")
    p.add_argument("--method", default="ls-criz")
    p.add_argument("--validation", help="CSV with the same columns, used to choose the path entry")
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--ridge-count", type=int, default=10)
    p.add_argument("--n-lambda", type=int, default=50)
    p.add_argument("--n-gamma", type=int, default=10)
    p.add_argument("--max-p", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_select)

    for name, help_text in (("part1", "ranking study (S and Pr(k))"),
                            ("part2", "modelling study (F1 and RTE)"),
                            ("edf", "effective degrees of freedom study")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON experiment config; flags override its fields")
        p.add_argument("--seed", type=int)
        p.add_argument("--reps", type=int)
        p.add_argument("--methods", help="comma-separated method labels")
        p.add_argument("--out", help="output directory")
        p.add_argument("--setting", choices=["low", "medium", "high-50", "high-100"])
        p.add_argument("--examples")
        p.add_argument("--rho")
        p.add_argument("--snr")
        p.add_argument("--k-max", type=int)
        p.add_argument("--max-p", type=int)
        p.add_argument("--workers", type=int, help="worker processes (default: $RI_SELECT_THREADS or CPU count)")
        p.add_argument("--stdout", action="store_true", help="also stream records.csv to stdout")
        if name == "edf":
            p.add_argument("--n-draws", type=int)
        if name == "part2":
            p.add_argument("--rte-plus-one", action="store_true", help="report RTE + 1 (Bayes rule scores 1)")
        p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (RiSelectError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
