"""Per-run metric files and the aggregate CSV / plain-text tables.

Run directories look like ``<root>/runs/<TICKER>/<estimator>/metrics.csv``
with one row per regime, plus ``<root>/runs/<TICKER>/correlations.csv``.
Aggregation only reads those files, so tables built from several partial
roots are identical to the tables of one monolithic run.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimators import EstimatorKind
from .evaluation import METRIC_NAMES, CorrelationReport, RegimeResult, Summary, aggregate
from .io import atomic_write_text

TABLE_ORDER = (
    EstimatorKind.CLOSE_TO_CLOSE,
    EstimatorKind.GARMAN_KLASS,
    EstimatorKind.PARKINSON,
    EstimatorKind.ROGERS_SATCHELL,
    EstimatorKind.YANG_ZHANG,
)
REGIME_ORDER = ("default", "lowered", "confident")
RUN_FIELDS = ("regime",) + METRIC_NAMES + ("keep_ratio", "n_kept", "n_total", "undefined")


def _fmt(x: float) -> str:
    return repr(float(x))


def run_metrics_text(results: list[RegimeResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_FIELDS)
    for r in results:
        m = r.metrics
        w.writerow([r.regime.name] + [_fmt(getattr(m, k)) for k in METRIC_NAMES]
                   + [_fmt(r.keep_ratio), r.n_kept, r.n_total, ";".join(sorted(m.undefined))])
    return buf.getvalue()


def read_run_metrics(path) -> dict[str, dict[str, float]]:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["regime"]] = {k: float(row[k]) for k in METRIC_NAMES + ("keep_ratio",)}
    return out


def correlation_text(rep: CorrelationReport) -> str:
    labels = [k.value for k in rep.kinds]
    lines = ["estimator," + ",".join(labels)]
    for i, k in enumerate(rep.kinds):
        lines.append(k.value + "," + ",".join(_fmt(v) for v in rep.matrix[i]))
    return "\n".join(lines) + "\n"


def read_correlations(path) -> dict[tuple[EstimatorKind, EstimatorKind], float]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    kinds = [EstimatorKind(v) for v in rows[0][1:]]
    return {(EstimatorKind(r[0]), kinds[j]): float(v) for r in rows[1:] for j, v in enumerate(r[1:])}


@dataclass
class EvalReport:
    """Per-(ticker, estimator) regime metrics and their cross-ticker summaries."""

    per_run: dict[tuple[str, EstimatorKind], dict[str, dict[str, float]]]
    aggregate: dict[str, dict[EstimatorKind, dict[str, Summary]]] = field(default_factory=dict)
    correlations: dict[tuple[EstimatorKind, EstimatorKind], float] = field(default_factory=dict)

    @property
    def tickers(self) -> list[str]:
        return sorted({t for t, _ in self.per_run})

    def estimators(self) -> list[EstimatorKind]:
        present = {k for _, k in self.per_run}
        return [k for k in TABLE_ORDER if k in present]

    def mean(self, regime: str, kind: EstimatorKind, metric: str) -> float:
        return self.aggregate[regime][kind][metric].mean


def build_report(per_run, correlations_by_ticker=None, ddof: int = 1) -> EvalReport:
    rep = EvalReport(dict(per_run))
    regimes = [r for r in REGIME_ORDER if any(r in v for v in per_run.values())]
    for regime in regimes:
        rep.aggregate[regime] = {}
        for kind in rep.estimators():
            rows = {t: v[regime] for (t, k), v in sorted(per_run.items(), key=lambda kv: kv[0][0])
                    if k is kind and regime in v}
            if rows:
                rep.aggregate[regime][kind] = aggregate(rows, ddof=ddof)
    if correlations_by_ticker:
        pairs = sorted({p for c in correlations_by_ticker.values() for p in c}, key=lambda p: (p[0].value, p[1].value))
        for p in pairs:
            vals = [c[p] for _, c in sorted(correlations_by_ticker.items()) if p in c]
            rep.correlations[p] = float(np.mean(vals))
    return rep


def collect_runs(roots) -> EvalReport:
    """Load every ``runs/<TICKER>/<estimator>/metrics.csv`` under the given roots."""
    per_run, corr = {}, {}
    for root in roots:
        runs = Path(root) / "runs"
        for mfile in sorted(runs.glob("*/*/metrics.csv")):
            ticker, kind = mfile.parent.parent.name, EstimatorKind(mfile.parent.name)
            if (ticker, kind) in per_run:
                raise ValueError(f"run {ticker}/{kind.value} appears in more than one root")
            per_run[(ticker, kind)] = read_run_metrics(mfile)
        for cfile in sorted(runs.glob("*/correlations.csv")):
            corr.setdefault(cfile.parent.name, read_correlations(cfile))
    if not per_run:
        raise FileNotFoundError(f"no run metrics found under {list(map(str, roots))}")
    return build_report(per_run, corr)


# -- tables -----------------------------------------------------------------

def _num(x: float, digits: int) -> str:
    return "nan" if math.isnan(x) else f"{x:.{digits}f}"


def metric_table_csv(rep: EvalReport, regime: str) -> str:
    head = ["estimator"] + [f"{m}_{s}" for m in METRIC_NAMES for s in ("mean", "std")] + ["keep_ratio_mean", "n_tickers"]
    lines = [",".join(head)]
    for kind, summ in rep.aggregate[regime].items():
        n = sum(1 for (_, k), v in rep.per_run.items() if k is kind and regime in v)
        vals = [_num(getattr(summ[m], s), 10) for m in METRIC_NAMES for s in ("mean", "std")]
        lines.append(",".join([kind.value] + vals + [_num(summ["keep_ratio"].mean, 10), str(n)]))
    return "\n".join(lines) + "\n"


def metric_table_text(rep: EvalReport, regime: str, title: str | None = None) -> str:
    width = 16
    out = [title or f"Evaluation metrics, {regime} regime"]
    out.append(" " * width + "".join(f"{m.capitalize():<14}" for m in ("Accuracy", "Precision", "Recall", "F1")))
    out.append(" " * width + "mean   std    " * 4)
    for kind, summ in rep.aggregate[regime].items():
        cells = "".join(f"{_num(summ[m].mean, 2):<7}{_num(summ[m].std, 2):<7}" for m in METRIC_NAMES)
        out.append(f"{kind.label:<{width}}{cells}".rstrip())
    return "\n".join(out) + "\n"


def keep_ratio_csv(rep: EvalReport, regime: str = "confident") -> str:
    lines = ["estimator,keep_ratio_mean,keep_ratio_std"]
    for kind, summ in rep.aggregate[regime].items():
        lines.append(f"{kind.value},{_num(summ['keep_ratio'].mean, 10)},{_num(summ['keep_ratio'].std, 10)}")
    return "\n".join(lines) + "\n"


def keep_ratio_text(rep: EvalReport, regime: str = "confident") -> str:
    kinds = list(rep.aggregate[regime])
    cols = [k.label for k in kinds]
    w = max(len(c) for c in cols) + 2
    head = "".join(f"{c:<{w}}" for c in cols).rstrip()
    vals = "".join(f"{_num(rep.aggregate[regime][k]['keep_ratio'].mean, 2):<{w}}" for k in kinds).rstrip()
    return "Average proportion of confident predictions\n" + head + "\n" + vals + "\n"


def _corr_kinds(rep: EvalReport) -> list[EstimatorKind]:
    present = {a for a, _ in rep.correlations}
    return [k for k in TABLE_ORDER if k in present]


def correlation_table_csv(rep: EvalReport) -> str:
    kinds = _corr_kinds(rep)
    lines = ["correlations," + ",".join(k.value for k in kinds)]
    for a in kinds:
        lines.append(a.value + "," + ",".join(_num(rep.correlations.get((a, b), math.nan), 10) for b in kinds))
    return "\n".join(lines) + "\n"


def correlation_table_text(rep: EvalReport) -> str:
    kinds = _corr_kinds(rep)
    w = 17
    out = ["Mean correlation of volatility estimates across tickers",
           " " * w + "".join(f"{k.label:<{w}}" for k in kinds).rstrip()]
    for a in kinds:
        out.append(f"{a.label:<{w}}" + "".join(f"{_num(rep.correlations.get((a, b), math.nan), 3):<{w}}" for b in kinds).rstrip())
    return "\n".join(out) + "\n"


def write_tables(rep: EvalReport, out_dir) -> list[Path]:
    """Write every aggregate table under ``out_dir/tables``; returns the paths."""
    tdir = Path(out_dir) / "tables"
    written = []

    def put(name, text):
        atomic_write_text(tdir / name, text)
        written.append(tdir / name)

    for regime in rep.aggregate:
        put(f"metrics_{regime}.csv", metric_table_csv(rep, regime))
        put(f"metrics_{regime}.txt", metric_table_text(rep, regime))
    if "confident" in rep.aggregate:
        put("keep_ratios.csv", keep_ratio_csv(rep))
        put("keep_ratios.txt", keep_ratio_text(rep))
    if rep.correlations:
        put("correlations.csv", correlation_table_csv(rep))
        put("correlations.txt", correlation_table_text(rep))
    return written
