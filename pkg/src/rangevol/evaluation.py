"""Confusion-matrix metrics, decision regimes and cross-ticker aggregation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .estimators import EstimatorKind, VolSeries, align

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


class RegimeKind(enum.Enum):
    DEFAULT = "default"
    LOWERED = "lowered"
    CONFIDENT = "confident"


@dataclass(frozen=True)
class Regime:
    """A rule turning a probability into an up/down call, or no call.

    Threshold regimes call up iff ``p >= threshold``. The confident regime
    drops ``lower <= p <= upper`` and otherwise calls up iff ``p > upper``.
    """

    kind: RegimeKind
    threshold: float = 0.5
    lower: float = 0.4
    upper: float = 0.5

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if not 0 < self.lower < self.upper < 1:
            raise ValueError("confidence band needs 0 < lower < upper < 1")

    @classmethod
    def default(cls) -> "Regime":
        return cls(RegimeKind.DEFAULT, 0.5)

    @classmethod
    def lowered(cls, threshold: float = 0.45) -> "Regime":
        return cls(RegimeKind.LOWERED, threshold)

    @classmethod
    def confident(cls, lower: float = 0.4, upper: float = 0.5) -> "Regime":
        return cls(RegimeKind.CONFIDENT, lower=lower, upper=upper)

    @property
    def name(self) -> str:
        return self.kind.value


def standard_regimes(threshold: float = 0.45, band=(0.4, 0.5)) -> list[Regime]:
    return [Regime.default(), Regime.lowered(threshold), Regime.confident(*band)]


def decide(p: float, regime: Regime) -> int | None:
    if regime.kind is RegimeKind.CONFIDENT:
        if regime.lower <= p <= regime.upper:
            return None
        return int(p > regime.upper)
    return int(p >= regime.threshold)


def decide_many(probs, regime: Regime) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`decide`: returns ``(preds, kept_mask)``."""
    p = np.asarray(probs, dtype=float)
    if regime.kind is RegimeKind.CONFIDENT:
        kept = (p < regime.lower) | (p > regime.upper)
        return (p > regime.upper).astype(np.int8), kept
    return (p >= regime.threshold).astype(np.int8), np.ones(p.shape, dtype=bool)


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_predictions(cls, preds, truth) -> "Confusion":
        p = np.asarray(preds, dtype=np.int8)
        t = np.asarray(truth, dtype=np.int8)
        if p.shape != t.shape:
            raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
        return cls(
            int(np.sum((p == 1) & (t == 1))),
            int(np.sum((p == 1) & (t == 0))),
            int(np.sum((p == 0) & (t == 0))),
            int(np.sum((p == 0) & (t == 1))),
        )


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: frozenset = field(default_factory=frozenset)
    """Names of metrics whose denominator was zero (reported as 0)."""

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in METRIC_NAMES}

    @classmethod
    def from_confusion(cls, cm: Confusion) -> "Metrics":
        undefined = set()

        def ratio(num, den, name):
            if den == 0:
                undefined.add(name)
                return 0.0
            return num / den

        acc = ratio(cm.tp + cm.tn, cm.total, "accuracy")
        prec = ratio(cm.tp, cm.tp + cm.fp, "precision")
        rec = ratio(cm.tp, cm.tp + cm.fn, "recall")
        f1 = ratio(2 * prec * rec, prec + rec, "f1")
        return cls(acc, prec, rec, f1, frozenset(undefined))


def metrics(preds, truth) -> Metrics:
    if len(preds) == 0:
        raise ValueError("no predictions to score")
    return Metrics.from_confusion(Confusion.from_predictions(preds, truth))


@dataclass(frozen=True)
class RegimeResult:
    regime: Regime
    metrics: Metrics
    keep_ratio: float
    n_kept: int
    n_total: int


def evaluate_regime(probs, truth, regime: Regime) -> RegimeResult:
    probs = np.asarray(probs, dtype=float)
    truth = np.asarray(truth, dtype=np.int8)
    if probs.shape != truth.shape:
        raise ValueError(f"length mismatch: {probs.shape} vs {truth.shape}")
    if len(probs) == 0:
        raise ValueError("no predictions to score")
    preds, kept = decide_many(probs, regime)
    n_kept = int(kept.sum())
    if n_kept == 0:
        m = Metrics(0.0, 0.0, 0.0, 0.0, frozenset(METRIC_NAMES))
    else:
        m = metrics(preds[kept], truth[kept])
    return RegimeResult(regime, m, n_kept / len(probs), n_kept, len(probs))


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float


def aggregate(per_ticker: Mapping[str, Mapping[str, float] | Metrics], ddof: int = 1) -> dict[str, Summary]:
    """Mean and standard deviation of each metric across tickers.

    Values may be :class:`Metrics` or plain ``name -> value`` mappings (e.g.
    with an extra ``keep_ratio``). A single ticker gets std 0.
    """
    if not per_ticker:
        raise ValueError("nothing to aggregate")
    rows = [m.as_dict() if isinstance(m, Metrics) else dict(m) for m in per_ticker.values()]
    out = {}
    for name in rows[0]:
        vals = np.array([r[name] for r in rows], dtype=float)
        std = float(np.std(vals, ddof=ddof)) if len(vals) > ddof else 0.0
        out[name] = Summary(float(np.mean(vals)), std)
    return out


@dataclass(frozen=True, eq=False)
class CorrelationReport:
    kinds: tuple[EstimatorKind, ...]
    matrix: np.ndarray
    flagged: frozenset = frozenset()
    """Estimators whose sigma had zero variance; their off-diagonal entries are NaN."""

    def get(self, a: EstimatorKind, b: EstimatorKind) -> float:
        return float(self.matrix[self.kinds.index(a), self.kinds.index(b)])

    def min_off_diagonal(self) -> float:
        n = len(self.kinds)
        return float(np.nanmin(self.matrix[~np.eye(n, dtype=bool)])) if n > 1 else math.nan


def correlation_report(vols: Mapping[EstimatorKind, VolSeries]) -> CorrelationReport:
    vols = align(dict(vols))
    kinds = tuple(vols)
    S = np.vstack([vols[k].sigma for k in kinds])
    if S.shape[1] < 3:
        raise ValueError("need at least 3 aligned points for correlations")
    centered = S - S.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered ** 2).sum(axis=1))
    flat = norms == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        C = (centered @ centered.T) / np.outer(norms, norms)
    C = np.clip(C, -1.0, 1.0)
    np.fill_diagonal(C, 1.0)
    return CorrelationReport(kinds, C, frozenset(k for k, f in zip(kinds, flat) if f))
