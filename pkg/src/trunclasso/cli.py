"""Command-line interface: fit, predict, simulate, se.

Every command takes --seed and is bit-reproducible under it.  Exit codes:
0 success, 1 usage or configuration error, 2 data validation error,
3 numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .adaptive import adaptive_weights, fit_adaptive_lasso
from .data import Dataset, FitResult
from .errors import (ColumnMismatch, ConfigError, DataError, SolverError,
                     TruncLassoError)
from .estimator import fit_unpenalized
from .randomweight import estimate_se
from .simulate import StudyConfig, paper_scenario, run_study
from .tuning import SelectionResult, lambda_grid, select_lambda

log = logging.getLogger(__name__)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="trunclasso",
                     description="Estimation and variable selection for "
                                 "doubly truncated linear regression")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--gamma", type=float, default=1.0,
                       help="adaptive weight exponent (default 1)")
        p.add_argument("--grid-size", type=int, default=50)
        p.add_argument("--se-reps", type=int, default=500)
        p.add_argument("--max-iter", type=int, default=50)
        p.add_argument("--tol", type=float, default=1e-6)

    p_fit = sub.add_parser("fit", help="fit and select on a CSV dataset")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--output", required=True)
    p_fit.add_argument("--lam", type=float, default=None,
                       help="fixed penalty level; skips the grid search "
                            "(0 turns the penalty off)")
    p_fit.add_argument("--split", type=float, default=None,
                       help="train fraction; fits on a seeded shuffle split "
                            "and writes the held-out rows next to the output")
    p_fit.add_argument("--pretty", action="store_true",
                       help="also print an aligned coefficient table")
    common(p_fit)

    p_pred = sub.add_parser("predict", help="predict from a stored fit report")
    p_pred.add_argument("--model", required=True, help="fit report CSV")
    p_pred.add_argument("--input", required=True, help="test rows (x columns)")
    p_pred.add_argument("--output", required=True)
    p_pred.add_argument("--seed", type=int, default=0)

    p_sim = sub.add_parser("simulate", help="run a replication study")
    p_sim.add_argument("--config", required=True, help="key = value file")
    p_sim.add_argument("--output", required=True)
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the seed in the config file")

    p_se = sub.add_parser("se", help="re-estimate standard errors for a stored fit")
    p_se.add_argument("--input", required=True, help="training CSV")
    p_se.add_argument("--meta", required=True, help="meta JSON written by fit")
    p_se.add_argument("--output", required=True)
    p_se.add_argument("--seed", type=int, default=0)
    p_se.add_argument("--se-reps", type=int, default=500)
    p_se.add_argument("--max-iter", type=int, default=50)
    p_se.add_argument("--tol", type=float, default=1e-6)
    return parser


def _sidecar(out, tag):
    return Path(f"{out.with_suffix('')}.{tag}")


def cmd_fit(args):
    dataset = fileio.read_csv(args.input)
    out = Path(args.output)
    if args.split is not None:
        if not 0.0 < args.split < 1.0:
            raise ConfigError("--split must be in (0, 1)", key="split")
        rng = np.random.default_rng(args.seed)
        perm = rng.permutation(dataset.n)
        n_train = max(2, int(round(args.split * dataset.n)))
        train_idx = np.sort(perm[:n_train])
        test_idx = np.sort(perm[n_train:])
        train = Dataset(dataset.y[train_idx], dataset.l[train_idx],
                        dataset.r[train_idx], dataset.x[train_idx])
        fileio.write_csv(train, _sidecar(out, "train.csv"))
        test = Dataset(dataset.y[test_idx], dataset.l[test_idx],
                       dataset.r[test_idx], dataset.x[test_idx])
        fileio.write_csv(test, _sidecar(out, "test.csv"))
        dataset = train

    pilot = fit_unpenalized(dataset, tol=args.tol, max_iter=args.max_iter)
    weights = adaptive_weights(pilot.beta, gamma=args.gamma)
    if args.lam is not None:
        fit = fit_adaptive_lasso(dataset, args.lam, weights, pilot.beta,
                                 tol=args.tol, max_iter=args.max_iter)
        selection = SelectionResult(lambda_hat=args.lam, fit=fit, trace=[])
    else:
        grid = lambda_grid(dataset, weights, size=args.grid_size,
                           beta_init=pilot.beta, tol=args.tol,
                           max_iter=args.max_iter)
        selection = select_lambda(dataset, weights, grid,
                                  beta_init=pilot.beta, tol=args.tol,
                                  max_iter=args.max_iter)
    fit = selection.fit

    se_map = {}
    se_info = None
    if args.se_reps > 0 and fit.active_set.size:
        se = estimate_se(dataset, selection, weights, reps=args.se_reps,
                         seed=args.seed, tol=args.tol, max_iter=args.max_iter)
        se_map = {int(j): float(s) for j, s in zip(se.active_set, se.se)}
        se_info = {"se_mad": {int(j): float(s) for j, s in
                              zip(se.active_set, se.se_mad)},
                   "n_replicates": se.n_replicates, "n_failed": se.n_failed}

    intercept = float(np.median(dataset.y - dataset.x @ fit.beta))
    fileio.write_report(out, fit.beta, se_map, intercept)
    if selection.trace:
        fileio.write_trace(_sidecar(out, "trace.csv"), selection.trace)
    meta = {
        "n": dataset.n, "p": dataset.p, "seed": args.seed,
        "gamma": args.gamma, "lambda_hat": float(selection.lambda_hat),
        "converged": bool(fit.converged), "iterations": int(fit.iterations),
        "objective": float(fit.objective),
        "active_set": [int(j) for j in fit.active_set],
        "beta": [float(b) for b in fit.beta],
        "beta_pilot": [float(b) for b in pilot.beta],
        "weights": [float(w) for w in weights.w],
        "intercept": intercept,
        "excluded": selection.excluded,
    }
    if se_info:
        meta["se"] = se_info
    fileio.write_meta(_sidecar(out, "meta.json"), meta)
    if args.pretty:
        _print_table(fit.beta, se_map, intercept)
    return 0


def _print_table(beta, se_map, intercept):
    print(f"{'name':<12}{'estimate':>14}{'se':>12}")
    for j, est in enumerate(beta):
        se = se_map.get(j)
        tail = f"{se:>12.4f}" if se is not None else f"{'-':>12}"
        print(f"{'x' + str(j + 1):<12}{est:>14.4f}" + tail)
    print(f"{'intercept':<12}{intercept:>14.4f}{'-':>12}")


def cmd_predict(args):
    estimates, _, intercept = fileio.read_report(args.model)
    x, y_true = fileio.read_covariates_csv(args.input)
    if x.shape[1] != estimates.shape[0]:
        raise ColumnMismatch(
            f"model has {estimates.shape[0]} covariates, input has {x.shape[1]}"
        )
    y_pred = intercept + x @ estimates
    fileio.write_predictions(args.output, y_pred, y_true)
    return 0


def cmd_simulate(args):
    cfg = fileio.parse_config(args.config)
    for key in ("n_tilde", "error_law", "truncation_target"):
        if key not in cfg:
            raise ConfigError(f"missing configuration key {key!r}", key=key)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    spec = paper_scenario(cfg["n_tilde"], cfg["error_law"],
                          cfg["truncation_target"])
    config = StudyConfig(
        spec=spec,
        replications=cfg.get("replications", 200),
        grid_size=cfg.get("grid_size", 20),
        gamma=cfg.get("gamma", 1.0),
        se_reps=cfg.get("se_reps", 0),
        n_jobs=cfg.get("n_jobs", 1),
        max_iter=cfg.get("max_iter", 50),
        tol=cfg.get("tol", 1e-6),
    )
    summary = run_study(config, seed)
    out = Path(args.output)
    fileio.write_study_summary(out, summary)
    fileio.write_meta(_sidecar(out, "calibration.json"), {
        "a_const": summary.spec.a_const,
        "c_const": summary.spec.c_const,
        "b_offset": summary.spec.b_offset,
        "seed": seed,
        "replications": summary.replications,
        "n_failed": summary.n_failed,
    })
    return 0


def cmd_se(args):
    dataset = fileio.read_csv(args.input)
    meta = fileio.read_meta(args.meta)
    from .adaptive import AdaptiveWeights
    weights = AdaptiveWeights(w=np.array(meta["weights"]),
                              gamma=meta["gamma"], cap=1e8)
    fit = FitResult(beta=np.array(meta["beta"]),
                    objective=meta["objective"],
                    iterations=meta["iterations"],
                    converged=meta["converged"])
    selection = SelectionResult(lambda_hat=meta["lambda_hat"], fit=fit)
    se = estimate_se(dataset, selection, weights, reps=args.se_reps,
                     seed=args.seed, tol=args.tol, max_iter=args.max_iter)
    se_map = {int(j): float(s) for j, s in zip(se.active_set, se.se)}
    fileio.write_report(args.output, fit.beta, se_map, meta.get("intercept", 0.0))
    return 0


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "predict":
            return cmd_predict(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "se":
            return cmd_se(args)
        raise _UsageError(f"unknown command {args.command!r}")
    except (_UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, TruncLassoError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
