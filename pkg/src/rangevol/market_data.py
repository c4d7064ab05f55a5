"""Daily OHLC bar ingestion and validation.

Prices are kept raw (no split/dividend adjustment): the range estimators mix
open, high, low and close, and vendor adjustments only touch the close.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("Date", "Open", "High", "Low", "Close")

Policy = Literal["skip", "strict"]


class DataError(ValueError):
    """Raised for unreadable or unusable market data."""


class BarValidationError(DataError):
    """A bar violates the OHLC ordering or positivity invariants."""

    def __init__(self, date, reason: str):
        self.date = date
        super().__init__(f"invalid bar on {date}: {reason}")


@dataclass(frozen=True)
class OhlcBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        reason = bar_violation(self.open, self.high, self.low, self.close)
        if reason:
            raise BarValidationError(self.date, reason)


def bar_violation(o: float, h: float, l: float, c: float) -> str | None:
    """Return a description of the first violated bar invariant, or None."""
    if not all(np.isfinite(v) for v in (o, h, l, c)):
        return "non-finite price"
    if min(o, h, l, c) <= 0:
        return "non-positive price"
    if l > h:
        return f"low {l} > high {h}"
    if l > min(o, c):
        return f"low {l} above min(open, close) {min(o, c)}"
    if h < max(o, c):
        return f"high {h} below max(open, close) {max(o, c)}"
    return None


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class OhlcSeries:
    """Immutable, date-sorted daily bars for one ticker.

    Columns are stored as read-only numpy arrays; ``dates`` has dtype
    ``datetime64[D]``. ``dropped`` is the number of input rows rejected by
    :func:`load_csv` (0 for series built any other way).
    """

    ticker: str
    dates: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    dropped: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "dates", _frozen(self.dates, "datetime64[D]"))
        for name in ("open", "high", "low", "close"):
            object.__setattr__(self, name, _frozen(getattr(self, name), float))
        n = len(self.dates)
        if any(len(getattr(self, k)) != n for k in ("open", "high", "low", "close")):
            raise DataError("column lengths differ")
        if n > 1 and not np.all(self.dates[1:] > self.dates[:-1]):
            raise DataError(f"{self.ticker}: dates must be strictly increasing")

    @classmethod
    def from_bars(cls, ticker: str, bars) -> "OhlcSeries":
        bars = list(bars)
        return cls(
            ticker,
            np.array([b.date for b in bars], dtype="datetime64[D]"),
            [b.open for b in bars],
            [b.high for b in bars],
            [b.low for b in bars],
            [b.close for b in bars],
        )

    def __len__(self) -> int:
        return len(self.dates)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OhlcSeries):
            return NotImplemented
        return self.ticker == other.ticker and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("dates", "open", "high", "low", "close")
        )

    __hash__ = None

    @property
    def bars(self) -> list[OhlcBar]:
        return list(self)

    def __iter__(self) -> Iterator[OhlcBar]:
        for i in range(len(self)):
            yield OhlcBar(
                self.dates[i].item(),
                float(self.open[i]),
                float(self.high[i]),
                float(self.low[i]),
                float(self.close[i]),
            )

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.open, self.high, self.low, self.close

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "Date": pd.to_datetime(self.dates).strftime("%Y-%m-%d"),
                "Open": self.open,
                "High": self.high,
                "Low": self.low,
                "Close": self.close,
            }
        )

    def to_csv(self, path) -> None:
        """Write in the same ``Date,Open,High,Low,Close`` layout load_csv reads."""
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def _to_float(text: str) -> float:
    # float() is correctly rounded; pd.to_numeric can be off by an ulp
    try:
        v = float(text)
    except ValueError:
        return math.nan
    return v if math.isfinite(v) else math.nan


def load_csv(path, ticker: str | None = None, policy: Policy = "skip") -> OhlcSeries:
    """Load a ``Date,Open,High,Low,Close[,...]`` CSV into a validated series.

    Rows with a missing or unparseable date or price are dropped. Rows that
    parse but violate the bar invariants, and repeated dates, are dropped with
    a warning under ``policy="skip"`` and raise under ``policy="strict"``.
    The number of rejected rows is stored on the result as ``dropped``.
    """
    if policy not in ("skip", "strict"):
        raise ValueError(f"unknown policy {policy!r}")
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    ticker = ticker or path.stem
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    raw.columns = [c.strip() for c in raw.columns]
    missing = [c for c in REQUIRED_COLUMNS if c not in raw.columns]
    if missing:
        raise DataError(f"{path}: missing required column(s) {missing}")
    n_input = len(raw)

    dates = pd.to_datetime(raw["Date"].str.strip(), format="%Y-%m-%d", errors="coerce")
    prices = raw[["Open", "High", "Low", "Close"]].apply(lambda col: col.map(_to_float))
    parsed = dates.notna() & prices.notna().all(axis=1)
    o, h, l, c = (prices[k].to_numpy() for k in ("Open", "High", "Low", "Close"))

    keep = parsed.to_numpy().copy()
    for i in np.flatnonzero(keep):
        reason = bar_violation(o[i], h[i], l[i], c[i])
        if reason is None:
            continue
        day = dates.iloc[i].date()
        if policy == "strict":
            raise BarValidationError(day, reason)
        log.warning("%s: dropping bar on %s: %s", ticker, day, reason)
        keep[i] = False

    frame = pd.DataFrame({"date": dates, "o": o, "h": h, "l": l, "c": c})[keep]
    frame = frame.sort_values("date", kind="mergesort")
    dup = frame["date"].duplicated(keep="first").to_numpy()
    if dup.any():
        first = frame["date"][dup].iloc[0].date()
        if policy == "strict":
            raise DataError(f"{ticker}: duplicate date {first}")
        log.warning("%s: dropping %d duplicate-date rows (first %s)", ticker, dup.sum(), first)
        frame = frame[~dup]
    if frame.empty:
        raise DataError(f"{path}: no valid rows")

    n_bad = n_input - len(frame)
    if n_bad:
        log.info("%s: %d of %d rows rejected", ticker, n_bad, n_input)
    return OhlcSeries(
        ticker,
        frame["date"].to_numpy().astype("datetime64[D]"),
        frame["o"].to_numpy(),
        frame["h"].to_numpy(),
        frame["l"].to_numpy(),
        frame["c"].to_numpy(),
        dropped=n_bad,
    )


def load_dir(data_dir, tickers=None, policy: Policy = "skip") -> dict[str, OhlcSeries]:
    """Load ``<TICKER>.csv`` files from a dataset directory, sorted by ticker."""
    data_dir = Path(data_dir)
    available = {p.stem: p for p in sorted(data_dir.glob("*.csv"))}
    if tickers is None or tickers == "all":
        tickers = list(available)
    result = {}
    for t in tickers:
        if t not in available:
            raise FileNotFoundError(data_dir / f"{t}.csv")
        result[t] = load_csv(available[t], t, policy)
    return result


def slice_by_date(series: OhlcSeries, start, end) -> OhlcSeries:
    """Bars with ``start <= date <= end`` (inclusive); may be empty."""
    start, end = np.datetime64(start, "D"), np.datetime64(end, "D")
    if start > end:
        raise ValueError(f"start {start} after end {end}")
    m = (series.dates >= start) & (series.dates <= end)
    return OhlcSeries(
        series.ticker,
        series.dates[m],
        series.open[m],
        series.high[m],
        series.low[m],
        series.close[m],
    )
