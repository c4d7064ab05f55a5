"""End-to-end pipeline: ingest, estimate, label, train, evaluate, report."""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimators import EstimatorKind, VolParams, compute_all
from .evaluation import Regime, correlation_report, evaluate_regime, standard_regimes
from .io import atomic_write_text
from .labeling import DirectionSeries, directions, make_dataset
from .lstm import CellKind, LstmModel, load_model, save_model
from .market_data import load_dir
from .reporting import EvalReport, collect_runs, correlation_text, run_metrics_text, write_tables
from .training import TrainConfig, train

log = logging.getLogger(__name__)

DISPLAY_SCALE = 252.0


@dataclass
class ExperimentConfig:
    data_dir: Path = Path("data")
    tickers: list[str] | str = "all"
    estimators: tuple[EstimatorKind, ...] = tuple(EstimatorKind)
    window: int = 21
    unroll: int = 10
    epochs: int = 300
    patience: int = 50
    batch: int = 32
    lr: float = 0.001
    dropout: float = 0.3
    threshold: float = 0.45
    band: tuple[float, float] = (0.4, 0.5)
    regimes: tuple[str, ...] = ("default", "lowered", "confident")
    hidden: tuple[int, ...] = (10, 10)
    train_frac: float = 0.70
    val_frac: float = 0.15
    policy: str = "skip"
    jobs: int = 1
    seed: int = 0
    out: Path = Path("out")

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
        self.out = Path(self.out)
        self.estimators = tuple(EstimatorKind.parse(e) if isinstance(e, str) else e for e in self.estimators)
        unknown = set(self.regimes) - {"default", "lowered", "confident"}
        if unknown:
            raise ValueError(f"unknown regime(s) {sorted(unknown)}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(learning_rate=self.lr, dropout_p=self.dropout, batch_size=self.batch,
                           max_epochs=self.epochs, patience=self.patience, seed=seed)

    def regime_list(self) -> list[Regime]:
        return [r for r in standard_regimes(self.threshold, self.band) if r.name in self.regimes]


def run_seed(master: int, ticker: str, kind: EstimatorKind) -> int:
    """Stable per-run seed; adding tickers or estimators never changes existing runs."""
    digest = hashlib.sha256(f"{master}|{ticker}|{kind.value}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def run_dir(root, ticker: str, kind: EstimatorKind) -> Path:
    return Path(root) / "runs" / ticker / kind.value


@dataclass
class RunOutcome:
    ticker: str
    estimator: EstimatorKind
    ok: bool
    files: list[Path] = field(default_factory=list)
    error: str = ""


def prepare_directions(config: ExperimentConfig, series) -> dict[EstimatorKind, DirectionSeries]:
    vols = compute_all(series, VolParams(config.window, 1.0), config.estimators)
    return {k: directions(v) for k, v in vols.items()}


def score(model: LstmModel, dataset, regimes):
    probs = model.predict_proba(dataset.test.features())
    return probs, [evaluate_regime(probs, dataset.test.targets, r) for r in regimes]


def train_one(config: ExperimentConfig, ticker: str, kind: EstimatorKind, dirs: DirectionSeries) -> RunOutcome:
    """Train, score and persist one (ticker, estimator) model."""
    try:
        seeds = np.random.SeedSequence(run_seed(config.seed, ticker, kind)).generate_state(2)
        init_seed, train_seed = int(seeds[0]), int(seeds[1])
        dataset = make_dataset(dirs, config.unroll, config.train_frac, config.val_frac)
        model = LstmModel.init(1, config.hidden, CellKind.LSTM, seed=init_seed)
        best, report = train(model, dataset, config.train_config(train_seed))
        probs, results = score(best, dataset, config.regime_list())

        d = run_dir(config.out, ticker, kind)
        d.mkdir(parents=True, exist_ok=True)
        files = [d / "model.txt", d / "loss_curve.csv", d / "predictions.csv", d / "metrics.csv", d / "train_summary.txt"]
        save_model(best, files[0])
        report.to_csv(files[1])
        pred_lines = ["date,probability,target"] + [
            f"{dte},{p!r},{t}" for dte, p, t in
            zip(dataset.test.target_dates.astype(str), probs.tolist(), dataset.test.targets.tolist())]
        atomic_write_text(files[2], "\n".join(pred_lines) + "\n")
        atomic_write_text(files[3], run_metrics_text(results))
        atomic_write_text(files[4], (
            f"ticker {ticker}\nestimator {kind.value}\ninit_seed {init_seed}\ntrain_seed {train_seed}\n"
            f"epochs_run {report.epochs_run}\nbest_epoch {report.best_epoch}\n"
            f"best_val_loss {report.best_val_loss!r}\nstopped_early {report.stopped_early}\n"
            f"n_train {len(dataset.train)}\nn_validation {len(dataset.validation)}\nn_test {len(dataset.test)}\n"))
        return RunOutcome(ticker, kind, True, files)
    except Exception as exc:  # one failed run must not abort the others
        log.error("%s/%s failed: %s", ticker, kind.value, exc)
        return RunOutcome(ticker, kind, False, error="".join(traceback.format_exception_only(type(exc), exc)).strip())


def _train_task(args):
    return train_one(*args)


def write_ticker_artifacts(config: ExperimentConfig, series) -> list[Path]:
    """Display-scale volatility CSVs and the per-ticker correlation matrix."""
    vols = compute_all(series, VolParams(config.window, DISPLAY_SCALE), config.estimators)
    tdir = Path(config.out) / "runs" / series.ticker
    tdir.mkdir(parents=True, exist_ok=True)
    files = []
    for kind, v in vols.items():
        v.to_csv(tdir / f"vol_{kind.value}.csv")
        files.append(tdir / f"vol_{kind.value}.csv")
    if len(vols) > 1:
        atomic_write_text(tdir / "correlations.csv", correlation_text(correlation_report(vols)))
        files.append(tdir / "correlations.csv")
    return files


@dataclass
class ExperimentResult:
    report: EvalReport | None
    outcomes: list[RunOutcome]
    files: list[Path]

    @property
    def exit_code(self) -> int:
        n_ok = sum(o.ok for o in self.outcomes)
        if n_ok == 0:
            return 1
        return 0 if n_ok == len(self.outcomes) else 2


def write_manifest(out, files) -> Path:
    out = Path(out)
    rel = sorted({str(Path(f).relative_to(out)) for f in files})
    atomic_write_text(out / "manifest.txt", "\n".join(rel) + "\n")
    return out / "manifest.txt"


def report_dirs(roots, out) -> tuple[EvalReport, list[Path]]:
    rep = collect_runs(roots)
    files = write_tables(rep, out)
    return rep, files


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """One model per (ticker, estimator), then the aggregate tables."""
    series = load_dir(config.data_dir, config.tickers, config.policy)
    config.out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    tasks, outcomes = [], []
    for ticker, s in series.items():
        try:
            files += write_ticker_artifacts(config, s)
            dirs = prepare_directions(config, s)
        except Exception as exc:
            log.error("%s: preprocessing failed: %s", ticker, exc)
            outcomes += [RunOutcome(ticker, k, False, error=str(exc)) for k in config.estimators]
            continue
        tasks += [(config, ticker, k, dirs[k]) for k in config.estimators]

    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes += list(pool.map(_train_task, tasks))
    else:
        outcomes += [_train_task(t) for t in tasks]

    for o in outcomes:
        files += o.files
    failures = [o for o in outcomes if not o.ok]
    if failures:
        atomic_write_text(config.out / "failures.txt",
                          "".join(f"{o.ticker},{o.estimator.value},{o.error}\n" for o in failures))
        files.append(config.out / "failures.txt")

    rep = None
    if any(o.ok for o in outcomes):
        rep, tables = report_dirs([config.out], config.out)
        files += tables
    files.append(write_manifest(config.out, files + [config.out / "manifest.txt"]))
    return ExperimentResult(rep, outcomes, files)


def evaluate_saved(config: ExperimentConfig, ticker: str, kind: EstimatorKind, model_path):
    """Re-score a saved model on the test partition rebuilt from the data files.

    Dates are aligned over ``config.estimators`` (plus ``kind``), so pass the
    same estimator set the model was trained with to get the same test range.
    """
    if kind not in config.estimators:
        config = dataclasses.replace(config, estimators=config.estimators + (kind,))
    series = load_dir(config.data_dir, [ticker], config.policy)[ticker]
    dirs = prepare_directions(config, series)[kind]
    dataset = make_dataset(dirs, config.unroll, config.train_frac, config.val_frac)
    _, results = score(load_model(model_path), dataset, config.regime_list())
    return results
