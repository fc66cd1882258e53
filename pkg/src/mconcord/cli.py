"""Command line entry point: ``mconcord {simulate,fit,path,cv,eval}``.

Exit codes: 0 success, 1 I/O failure, 2 usage or parse error, 3 a fit did
not converge.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import io
from .core import Dataset
from .metrics import confusion, eval_report
from .modelsel import (
    CvConfig,
    LambdaGrid,
    cross_validate,
    parse_grid_spec,
    regularization_path,
    univariate_view,
    node_edges,
)
from .optimizer import FitConfig, fit
from .synth import GeneratorConfig, generate_truth, sample

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _positive_float(text):
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return x


def _nonneg_float(text):
    x = float(text)
    if not x >= 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return x


def _positive_int(text):
    x = int(text)
    if x < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return x


def _grid(text):
    try:
        count, ratio = parse_grid_spec(text)
        LambdaGrid.build(1.0, count, ratio)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return count, ratio


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mconcord", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw a random block precision matrix and samples")
    sim.add_argument("--p", type=_positive_int, required=True)
    sim.add_argument("--k", type=_positive_int, required=True)
    sim.add_argument("--density", type=_positive_float, required=True)
    sim.add_argument("--n", type=_positive_int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)

    def data_args(p):
        p.add_argument("--data", required=True)
        p.add_argument("--partition")
        p.add_argument("--no-center", action="store_true", help="use the data as given")
        p.add_argument("--standardize", action="store_true", help="scale columns to unit variance")
        p.add_argument("--mode", choices=("mconcord", "concord"), default="mconcord")
        p.add_argument("--tol", type=_positive_float, default=1e-6)
        p.add_argument("--max-sweeps", type=_positive_int, default=500)
        p.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="fit at one penalty")
    data_args(f)
    f.add_argument("--lambda", dest="lam", type=_nonneg_float, required=True)

    pth = sub.add_parser("path", help="warm-started fits along a penalty grid")
    data_args(pth)
    pth.add_argument("--lambda-grid", type=_grid, default=(30, 0.01), metavar="COUNT:RATIO")
    pth.add_argument("--jobs", type=_positive_int, default=1)
    pth.add_argument("--truth", help="truth or edge JSON; adds an N_c column")

    cv = sub.add_parser("cv", help="choose the penalty by K-fold cross-validation")
    data_args(cv)
    cv.add_argument("--lambda-grid", type=_grid, default=(30, 0.01), metavar="COUNT:RATIO")
    cv.add_argument("--folds", type=_positive_int, default=5)
    cv.add_argument("--seed", type=int, default=0)
    cv.add_argument("--patience", type=_positive_int)
    cv.add_argument("--jobs", type=_positive_int, default=1)

    ev = sub.add_parser("eval", help="score an estimated edge set against the truth")
    ev.add_argument("--estimate", required=True, help="edge JSON")
    ev.add_argument("--truth", required=True, help="truth or edge JSON")
    ev.add_argument("--out", required=True)
    return parser


# -- helpers -----------------------------------------------------------------


def _load(args):
    part = io.read_partition(args.partition) if args.partition else None
    data = io.read_dataset(args.data, part, center=not args.no_center)
    if args.standardize:
        data = data.standardized()
    return data


def _model_data(data: Dataset, mode: str) -> Dataset:
    return univariate_view(data) if mode == "concord" else data


def _fit_config(args, lam=0.0) -> FitConfig:
    return FitConfig(lam=lam, tol=args.tol, max_sweeps=args.max_sweeps)


def _resolved(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        # execution details that cannot change any result
        if k in ("verbose", "jobs", "out"):
            continue
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _edge_extra(args, lam, converged):
    return {**io.provenance(_resolved(args)), "lambda": lam, "converged": converged}


# -- subcommands ---------------------------------------------------------------


def run_simulate(args) -> int:
    try:
        cfg = GeneratorConfig(p=args.p, k=args.k, density=args.density, n=args.n, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    truth = generate_truth(cfg)
    data = sample(truth, cfg.n, cfg.seed)
    out = _outdir(args.out)
    io.write_truth(truth, out / "truth.json")
    io.write_dataset(data, out / "data.csv")
    io.write_partition(data.partition, out / "partition.json")
    print(json.dumps({**io.provenance(_resolved(args)), "edges": len(truth.graph)}))
    return EXIT_OK


def run_fit(args) -> int:
    data = _load(args)
    model = _model_data(data, args.mode)
    res = fit(model, _fit_config(args, args.lam))
    out = _outdir(args.out)
    obj = io.fit_result_to_dict(res)
    obj["config"] = _resolved(args)
    io.dump_json(obj, out / "fit.json")
    io.write_edge_graph(
        node_edges(res, data.partition), out / "edges.json", _edge_extra(args, res.lam, res.converged)
    )
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def run_path(args) -> int:
    data = _load(args)
    model = _model_data(data, args.mode)
    count, ratio = args.lambda_grid
    grid = LambdaGrid.for_data(model, count, ratio)
    truth = io.read_edge_graph(args.truth) if args.truth else None
    if truth is not None and truth.p != data.partition.p:
        raise UsageError(f"truth has p={truth.p} but the data has {data.partition.p} nodes")
    results = regularization_path(model, grid.values, _fit_config(args))
    out = _outdir(args.out)
    with open(out / "path.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "lambda", "N_t", "objective", "converged", "sweeps"] + (["N_c"] if truth else []))
        for t, res in enumerate(results):
            g = node_edges(res, data.partition)
            row = [t, repr(res.lam), len(g), repr(res.objective), int(res.converged), res.sweeps]
            if truth is not None:
                row.append(confusion(g, truth).n_correct)
            w.writerow(row)
            io.write_edge_graph(g, out / f"edges_{t:03d}.json", _edge_extra(args, res.lam, res.converged))
    io.dump_json(
        {**io.provenance(_resolved(args)), "lambda_max": grid.lambda_max, "grid": list(grid.values)},
        out / "path.json",
    )
    return EXIT_OK if all(r.converged for r in results) else EXIT_NONCONVERGED


def run_cv(args) -> int:
    data = _load(args)
    model = _model_data(data, args.mode)
    count, ratio = args.lambda_grid
    if args.folds < 2 or args.folds > data.n:
        raise UsageError(f"--folds must lie in 2..{data.n}")
    cfg = CvConfig(folds=args.folds, seed=args.seed, count=count, ratio=ratio, patience=args.patience)
    try:
        res = cross_validate(model, cfg, _fit_config(args), jobs=args.jobs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    best = fit(model, _fit_config(args, res.best_lambda))
    out = _outdir(args.out)
    report = {
        **io.provenance(_resolved(args)),
        "fold_seed": args.seed,
        "folds": args.folds,
        "lambda_max": res.grid.lambda_max,
        "grid": list(res.grid.values),
        "mean_loss": [None if x != x else float(x) for x in res.mean_loss],
        "sd_loss": [None if x != x else float(x) for x in res.sd_loss],
        "best_lambda": res.best_lambda,
        "best_index": res.best_index,
        "converged": best.converged,
        "edges": len(node_edges(best, data.partition)),
    }
    io.dump_json(report, out / "cv.json")
    obj = io.fit_result_to_dict(best)
    obj["config"] = _resolved(args)
    io.dump_json(obj, out / "fit.json")
    io.write_edge_graph(
        node_edges(best, data.partition), out / "edges.json", _edge_extra(args, best.lam, best.converged)
    )
    return EXIT_OK if best.converged else EXIT_NONCONVERGED


def run_eval(args) -> int:
    est = io.read_edge_graph(args.estimate)
    truth = io.read_edge_graph(args.truth)
    if est.p != truth.p:
        raise UsageError(f"estimate has p={est.p} but truth has p={truth.p}")
    report = {**io.provenance(_resolved(args)), **eval_report(est, truth)}
    out = _outdir(args.out)
    io.dump_json(report, out / "eval.json")
    print(json.dumps({k: report[k] for k in ("N_t", "N_c", "TPR", "PPV", "MCC")}))
    return EXIT_OK


COMMANDS = {
    "simulate": run_simulate,
    "fit": run_fit,
    "path": run_path,
    "cv": run_cv,
    "eval": run_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, io.FormatError) as exc:
        print(f"mconcord {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"mconcord {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mconcord {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
