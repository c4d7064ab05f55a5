"""Command-line entry point.

    rangevol run       --data-dir DIR [--config FILE] [flags]   full pipeline
    rangevol estimate  --data-dir DIR --out DIR                 volatility CSVs only
    rangevol simulate  --out DIR [--tickers A,B] [--days N]     synthetic OHLC CSVs
    rangevol train     --data-dir DIR --ticker T --estimator E  one model
    rangevol evaluate  --data-dir DIR --ticker T --estimator E  re-score a saved model
    rangevol report    ROOT [ROOT ...] --out DIR                aggregate existing runs

A config file holds ``key = value`` lines using the long flag names
(``data-dir = data``, ``epochs = 300``); command-line flags override it.
Exit status: 0 success, 1 every run failed, 2 some runs failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import gbm
from .estimators import EstimatorKind, VolParams, compute_all
from .experiment import (
    ExperimentConfig,
    evaluate_saved,
    prepare_directions,
    report_dirs,
    run_dir,
    run_experiment,
    train_one,
    write_manifest,
)
from .market_data import load_dir
from .reporting import metric_table_text, run_metrics_text


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _tickers(text: str):
    return "all" if text.strip() == "all" else _csv_list(text)


def _estimators(text: str):
    if text.strip() == "all":
        return tuple(EstimatorKind)
    return tuple(EstimatorKind.parse(t) for t in _csv_list(text))


def _floats(text: str):
    return tuple(float(t) for t in _csv_list(text))


def _ints(text: str):
    return tuple(int(t) for t in _csv_list(text))


# flag name -> (config field, converter, help)
EXPERIMENT_FLAGS = {
    "data-dir": ("data_dir", Path, "directory of <TICKER>.csv files"),
    "tickers": ("tickers", _tickers, "comma-separated tickers or 'all'"),
    "estimators": ("estimators", _estimators, "comma-separated estimators (cc,p,gk,rs,yz) or 'all'"),
    "window": ("window", int, "volatility window in days (21)"),
    "unroll": ("unroll", int, "direction labels per input window (10)"),
    "epochs": ("epochs", int, "maximum epochs (300)"),
    "patience": ("patience", int, "early-stopping patience in epochs (50)"),
    "batch": ("batch", int, "mini-batch size (32)"),
    "lr": ("lr", float, "Adam learning rate (0.001)"),
    "dropout": ("dropout", float, "dropout on non-recurrent connections (0.3)"),
    "threshold": ("threshold", float, "lowered decision threshold (0.45)"),
    "band": ("band", _floats, "unconfident probability band LO,HI (0.4,0.5)"),
    "regimes": ("regimes", lambda s: tuple(_csv_list(s)), "regimes to score (default,lowered,confident)"),
    "hidden": ("hidden", _ints, "hidden units per layer (10,10)"),
    "train-frac": ("train_frac", float, "fraction of targets before the test split (0.70)"),
    "val-frac": ("val_frac", float, "validation share of the training range (0.15)"),
    "policy": ("policy", str, "bad-row policy: skip or strict"),
    "jobs": ("jobs", int, "parallel training runs (1)"),
    "seed": ("seed", int, "master seed (0)"),
    "out": ("out", Path, "output directory"),
}


def read_config_file(path) -> dict:
    values = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in EXPERIMENT_FLAGS:
            raise ValueError(f"{path}:{n}: unknown key {key!r}")
        field_name, conv, _ = EXPERIMENT_FLAGS[key]
        values[field_name] = conv(val)
    return values


def _add_experiment_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="key = value config file; flags override it")
    for flag, (dest, conv, help_) in EXPERIMENT_FLAGS.items():
        p.add_argument(f"--{flag}", dest=dest, type=conv, default=None, help=help_)


def experiment_config(args) -> ExperimentConfig:
    values = read_config_file(args.config) if args.config else {}
    for dest, _, _ in EXPERIMENT_FLAGS.values():
        v = getattr(args, dest, None)
        if v is not None:
            values[dest] = v
    return ExperimentConfig(**values)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rangevol", description="Volatility direction-of-change experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline over every ticker and estimator")
    _add_experiment_flags(p)

    p = sub.add_parser("estimate", help="write rolling volatility CSVs")
    p.add_argument("--data-dir", type=Path, required=True)
    p.add_argument("--tickers", type=_tickers, default="all")
    p.add_argument("--estimators", type=_estimators, default=tuple(EstimatorKind))
    p.add_argument("--window", type=int, default=21)
    p.add_argument("--scale", type=float, default=252.0, help="time-unit scale F (252)")
    p.add_argument("--policy", default="skip")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("simulate", help="write GBM bars in the market-data CSV format")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--tickers", type=_csv_list, default=["SIM"])
    p.add_argument("--days", type=int, default=2518)
    p.add_argument("--sigma", type=float, default=0.2, help="annualised intraday volatility")
    p.add_argument("--mu", type=float, default=0.0, help="annualised drift")
    p.add_argument("--jump", type=float, default=0.0, help="annualised overnight-gap volatility")
    p.add_argument("--steps", type=int, default=390, help="intraday steps per day")
    p.add_argument("--regime-vol", action="store_true", help="let daily volatility follow a log-AR(1) path")
    p.add_argument("--seed", type=int, default=0)

    for name, help_ in (("train", "train one (ticker, estimator) model"),
                        ("evaluate", "re-score a saved model and print its metrics CSV")):
        p = sub.add_parser(name, help=help_)
        _add_experiment_flags(p)
        p.add_argument("--ticker", required=True)
        p.add_argument("--estimator", type=EstimatorKind.parse, required=True)
        if name == "evaluate":
            p.add_argument("--model", type=Path, help="model file (default: the run directory's model.txt)")

    p = sub.add_parser("report", help="aggregate the run directories under one or more roots")
    p.add_argument("roots", nargs="+", type=Path)
    p.add_argument("--out", type=Path, required=True)
    return ap


def cmd_run(args) -> int:
    result = run_experiment(experiment_config(args))
    for o in result.outcomes:
        if not o.ok:
            print(f"FAILED {o.ticker}/{o.estimator.value}: {o.error}", file=sys.stderr)
    if result.report is not None:
        for regime in result.report.aggregate:
            print(metric_table_text(result.report, regime))
    return result.exit_code


def cmd_estimate(args) -> int:
    series = load_dir(args.data_dir, args.tickers, args.policy)
    for ticker, s in series.items():
        vols = compute_all(s, VolParams(args.window, args.scale), args.estimators)
        d = args.out / ticker
        d.mkdir(parents=True, exist_ok=True)
        for kind, v in vols.items():
            v.to_csv(d / f"vol_{kind.value}.csv")
    print(f"wrote volatility series for {len(series)} ticker(s) to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    for i, ticker in enumerate(args.tickers):
        cfg = gbm.GbmConfig(sigma_true=args.sigma, mu=args.mu, jump_sigma=args.jump,
                            steps_per_day=args.steps, days=args.days, seed=args.seed * 1000 + i)
        path = gbm.log_ou_sigma_path(args.days, level=args.sigma, seed=cfg.seed) if args.regime_vol else None
        gbm.simulate(cfg, sigma_path=path, ticker=ticker).to_csv(args.out / f"{ticker}.csv")
    print(f"wrote {len(args.tickers)} series to {args.out}")
    return 0


def cmd_train(args) -> int:
    config = experiment_config(args)
    kinds = config.estimators if args.estimator in config.estimators else config.estimators + (args.estimator,)
    config = dataclasses.replace(config, estimators=kinds)
    series = load_dir(config.data_dir, [args.ticker], config.policy)[args.ticker]
    outcome = train_one(config, args.ticker, args.estimator, prepare_directions(config, series)[args.estimator])
    if not outcome.ok:
        print(f"FAILED {args.ticker}/{args.estimator.value}: {outcome.error}", file=sys.stderr)
        return 1
    print((run_dir(config.out, args.ticker, args.estimator) / "metrics.csv").read_text(), end="")
    return 0


def cmd_evaluate(args) -> int:
    config = experiment_config(args)
    model = args.model or run_dir(config.out, args.ticker, args.estimator) / "model.txt"
    print(run_metrics_text(evaluate_saved(config, args.ticker, args.estimator, model)), end="")
    return 0


def cmd_report(args) -> int:
    rep, files = report_dirs(args.roots, args.out)
    write_manifest(args.out, files)
    for regime in rep.aggregate:
        print(metric_table_text(rep, regime))
    return 0


COMMANDS = {"run": cmd_run, "estimate": cmd_estimate, "simulate": cmd_simulate,
            "train": cmd_train, "evaluate": cmd_evaluate, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"rangevol {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
