"""Command-line interface.

Subcommands: thresholds, fit, predict, evaluate, riskscore, simulate. Every
run writes its outputs plus ``run-manifest.json`` (resolved configuration,
seed and SHA-256 of every input and output) under ``--output-dir``.

Exit codes: 0 success, 1 invalid input or arguments, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path


from . import __version__
from .data import DataError, load_csv, write_table
from .metrics import evaluate
from .riskscore import build_table, score_many, table_csv
from .selection import CvConfig, Metric, fit_cv
from .simulation import preset, rate_study, records_csv, run_study, summary_csv
from .solver import FilterModel, Method, SolverConfig, classify, fit_dataset, predict_proba
from .splits import BaggingConfig, SplitCriterion, ThresholdSet, estimate_thresholds

log = logging.getLogger("filterlogit")


class UsageError(Exception):
    """Bad arguments or input files (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Run:
    """Collects inputs and outputs of one invocation for the manifest."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}

    def input(self, path) -> Path:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"input file not found: {p}")
        self.inputs[str(path)] = _sha256(p)
        return p

    def write(self, name: str, text: str) -> Path:
        p = self.out / name
        p.write_text(text, encoding="utf-8")
        self.outputs[name] = _sha256(p)
        return p

    def write_rows(self, name: str, header, rows) -> Path:
        p = self.out / name
        write_table(p, header, rows)
        self.outputs[name] = _sha256(p)
        return p

    def manifest(self) -> None:
        cfg = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "output_dir")}
        doc = {
            "tool": "filterlogit",
            "version": __version__,
            "command": self.args.command,
            "seed": self.args.seed,
            "config": cfg,
            "inputs": self.inputs,
            "outputs": dict(sorted(self.outputs.items())),
        }
        (self.out / "run-manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                                   encoding="utf-8")


def _load_model(run: _Run, path) -> FilterModel:
    p = run.input(path)
    try:
        return FilterModel.loads(p.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"{p}: not a valid model document ({exc})") from None


def _load_thresholds(run: _Run, path) -> ThresholdSet:
    p = run.input(path)
    try:
        return ThresholdSet.from_json(json.loads(p.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"{p}: not a valid thresholds document ({exc})") from None


def _thresholds_for(run: _Run, args, data) -> ThresholdSet:
    if args.thresholds:
        return _load_thresholds(run, args.thresholds)
    ts = estimate_thresholds(data, BaggingConfig(args.bags, args.seed), k=args.k,
                             criterion=SplitCriterion(args.criterion))
    run.write("thresholds.json", ts.dumps() + "\n")
    return ts


def cmd_thresholds(run: _Run, args) -> None:
    data = load_csv(run.input(args.data), args.label)
    ts = estimate_thresholds(data, BaggingConfig(args.bags, args.seed), k=args.k,
                             criterion=SplitCriterion(args.criterion))
    run.write("thresholds.json", ts.dumps() + "\n")


def cmd_fit(run: _Run, args) -> None:
    data = load_csv(run.input(args.data), args.label)
    ts = _thresholds_for(run, args, data)
    solver = SolverConfig(tol=args.tol, max_iters=args.max_iters, method=Method(args.solver))
    if args.cv:
        cv = CvConfig(n_folds=args.folds, metric=Metric(args.metric), rng_seed=args.seed,
                      two_se_rule=args.two_se)
        model, curve = fit_cv(data, ts, cv, solver)
        run.write_rows("cv_curve.csv", ["lambda", "mean_metric", "sd_metric"], curve.rows())
    else:
        if args.lam is None:
            raise UsageError("fit needs --lambda L or --cv")
        model = fit_dataset(data, ts, SolverConfig(lam=args.lam, tol=args.tol, max_iters=args.max_iters,
                                                   method=Method(args.solver)))
    run.write("model.json", model.dumps() + "\n")


def cmd_predict(run: _Run, args) -> None:
    model = _load_model(run, args.model)
    data = load_csv(run.input(args.data), args.label)
    prob = predict_proba(model, data)
    lab = classify(model, data, args.cutoff)
    run.write_rows("predictions.csv", ["row", "probability", "label"],
                   [(i + 1, float(p), int(c)) for i, (p, c) in enumerate(zip(prob, lab))])


def cmd_evaluate(run: _Run, args) -> None:
    model = _load_model(run, args.model)
    data = load_csv(run.input(args.data), args.label)
    rep = evaluate(predict_proba(model, data), data.labels, fpr_hi=args.fpr_hi, alpha=args.alpha)
    run.write_rows("evaluation.csv", ["metric", "value"], [(k, float(v)) for k, v in rep.rows()])
    run.write_rows("murphy.csv", ["p", "mean_score"],
                   [(float(g), float(s)) for g, s in zip(rep.murphy.grid, rep.murphy.score)])


def cmd_riskscore(run: _Run, args) -> None:
    model = _load_model(run, args.model)
    table = build_table(model, args.merge_tol)
    run.write("riskscore.csv", table_csv(table))
    if args.score:
        data = load_csv(run.input(args.score), args.label)
        if tuple(data.feature_names) != tuple(model.names):
            raise UsageError("covariates in --score file do not match the model")
        s = score_many(table, data)
        run.write_rows("scores.csv", ["row", "score"], [(i + 1, f"{v:.2f}") for i, v in enumerate(s)])


def cmd_simulate(run: _Run, args) -> None:
    designs, pipeline, competitors = preset(args.design, reps=args.reps, seed=args.seed, n=args.n, rho=args.rho)
    results = [run_study(d, pipeline, competitors, threads=args.threads) for d in designs]
    run.write("records.csv", records_csv(results))
    run.write("summary.csv", summary_csv(results))
    if len(results) >= 4:
        slope, pts = rate_study(results)
        run.write_rows("rate.csv", ["n", "mab_t"], [(n, float(m)) for n, m in pts] + [("slope", slope)])
    failures = {f"{r.design.n}:{k}": v for r in results for k, v in r.failures.items()}
    if failures:
        run.write("failures.json", json.dumps(failures, indent=2, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--threads", type=int, default=1, help="worker processes for simulations (default 1)")
    g.add_argument("--output-dir", default=".", help="directory for all outputs (default .)")
    g.add_argument("--verbose", "-v", action="store_true")
    g.add_argument("--label", default="y", help="label column name in CSV inputs (default y)")

    p = _Parser(prog="filterlogit", description=__doc__.split("\n\n")[0],
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def bagging_opts(sp):
        sp.add_argument("--bags", type=int, default=100, help="bootstrap resamples (default 100)")
        sp.add_argument("--k", type=int, default=1, help="cuts per covariate (default 1)")
        sp.add_argument("--criterion", choices=["gini", "entropy"], default="gini")

    sp = sub.add_parser("thresholds", parents=[common], help="estimate cut points")
    sp.add_argument("--data", required=True)
    bagging_opts(sp)
    sp.set_defaults(func=cmd_thresholds)

    sp = sub.add_parser("fit", parents=[common], help="fit the fused logistic model")
    sp.add_argument("--data", required=True)
    sp.add_argument("--thresholds", help="thresholds.json; estimated from --data when omitted")
    bagging_opts(sp)
    grp = sp.add_mutually_exclusive_group()
    grp.add_argument("--lambda", dest="lam", type=float)
    grp.add_argument("--cv", action="store_true", help="choose lambda by cross-validation")
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--metric", choices=["deviance", "auc"], default="deviance")
    sp.add_argument("--two-se", action="store_true", help="largest lambda within two standard errors")
    sp.add_argument("--solver", choices=["prox_grad", "prox_newton"], default="prox_grad")
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--max-iters", type=int, default=20000)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("predict", parents=[common], help="predicted probabilities and labels")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--cutoff", type=float, default=0.5)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", parents=[common], help="AUC, pAUC, proper scores, Murphy curve")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--alpha", type=float, default=0.9)
    sp.add_argument("--fpr-hi", type=float, default=0.1)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("riskscore", parents=[common], help="0-100 risk-score table")
    sp.add_argument("--model", required=True)
    sp.add_argument("--score", help="CSV of individuals to score")
    sp.add_argument("--merge-tol", type=float, default=1e-8)
    sp.set_defaults(func=cmd_riskscore)

    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo studies")
    sp.add_argument("--design", choices=["table1", "table2", "table3"], required=True)
    sp.add_argument("--reps", type=int, default=50)
    sp.add_argument("--n", type=int, help="override the sample size")
    sp.add_argument("--rho", type=float, help="override the AR(1) correlation")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        run = _Run(args)
        args.func(run, args)
        run.manifest()
    except (UsageError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
