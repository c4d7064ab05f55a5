"""Range-based volatility estimators and LSTM direction-of-change forecasting."""

from .estimators import EstimatorKind, VolParams, VolSeries, compute_all
from .market_data import OhlcBar, OhlcSeries, load_csv, slice_by_date

__all__ = [
    "EstimatorKind",
    "OhlcBar",
    "OhlcSeries",
    "VolParams",
    "VolSeries",
    "compute_all",
    "load_csv",
    "slice_by_date",
]
