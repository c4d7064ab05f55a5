"""Rolling-window close-to-close and range-based volatility estimators.

Every estimator is available at two levels:

* ``*_sigma(o, h, l, c, window, scale)`` works on raw price arrays and rolls
  along the last axis, so a ``(paths, days)`` block of simulated prices is
  handled in one call. Element ``j`` of the result belongs to the window
  ending at bar ``j + offset`` where ``offset`` is ``window`` for the two
  estimators that need the previous close and ``window - 1`` otherwise.
* The ``OhlcSeries`` level functions (``close_to_close``, ``parkinson``, ...)
  wrap the array result in a dated :class:`VolSeries`.

Windows advance one day at a time. The close-to-close and Yang-Zhang variance
terms subtract the window mean and divide by ``N - 1``; the Parkinson,
Garman-Klass and Rogers-Satchell sums divide by ``N``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .io import atomic_write_text
from .market_data import OhlcSeries

LN2 = math.log(2.0)
GK_CLOSE_COEF = 2.0 * LN2 - 1.0


class InsufficientDataError(ValueError):
    pass


class EstimatorKind(enum.Enum):
    CLOSE_TO_CLOSE = "close_to_close"
    PARKINSON = "parkinson"
    GARMAN_KLASS = "garman_klass"
    ROGERS_SATCHELL = "rogers_satchell"
    YANG_ZHANG = "yang_zhang"

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def needs_prev_close(self) -> bool:
        return self in (EstimatorKind.CLOSE_TO_CLOSE, EstimatorKind.YANG_ZHANG)

    @classmethod
    def parse(cls, name: str) -> "EstimatorKind":
        key = name.strip().lower().replace("-", "_")
        if key in _ALIASES:
            return _ALIASES[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown estimator {name!r}") from None


_LABELS = {
    EstimatorKind.CLOSE_TO_CLOSE: "close-to-close",
    EstimatorKind.PARKINSON: "Parkinson",
    EstimatorKind.GARMAN_KLASS: "Garman-Klass",
    EstimatorKind.ROGERS_SATCHELL: "Rogers-Satchell",
    EstimatorKind.YANG_ZHANG: "Yang-Zhang",
}
_ALIASES = {
    "cc": EstimatorKind.CLOSE_TO_CLOSE,
    "p": EstimatorKind.PARKINSON,
    "gk": EstimatorKind.GARMAN_KLASS,
    "rs": EstimatorKind.ROGERS_SATCHELL,
    "yz": EstimatorKind.YANG_ZHANG,
}


@dataclass(frozen=True)
class VolParams:
    """Window length in days and the time-unit scale factor.

    ``window=1`` is accepted for the single-bar estimators (Parkinson,
    Garman-Klass, Rogers-Satchell); the two estimators with an ``N - 1``
    divisor reject it.
    """

    window: int = 21
    scale: float = 1.0

    def __post_init__(self):
        if int(self.window) != self.window or self.window < 1:
            raise ValueError(f"window must be a positive integer, got {self.window}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")


@dataclass(frozen=True, eq=False)
class VolSeries:
    estimator: EstimatorKind
    params: VolParams
    dates: np.ndarray
    sigma: np.ndarray
    clamped: int = field(default=0)

    def __post_init__(self):
        if len(self.dates) != len(self.sigma):
            raise ValueError("dates and sigma lengths differ")

    def __len__(self) -> int:
        return len(self.sigma)

    def to_csv(self, path) -> None:
        lines = ["date,sigma"]
        lines += [f"{d},{s!r}" for d, s in zip(self.dates.astype(str), self.sigma.tolist())]
        atomic_write_text(path, "\n".join(lines) + "\n")


def yang_zhang_k(window: int) -> float:
    return 0.34 / (1.34 + (window + 1) / (window - 1))


def _check_len(n_bars: int, need: int, name: str):
    if n_bars < need:
        raise InsufficientDataError(f"{name} needs at least {need} bars, got {n_bars}")


def _rolling_mean(x: np.ndarray, window: int) -> np.ndarray:
    return sliding_window_view(x, window, axis=-1).mean(axis=-1)


def _rolling_var(x: np.ndarray, window: int) -> np.ndarray:
    return sliding_window_view(x, window, axis=-1).var(axis=-1, ddof=1)


def _finish(var: np.ndarray, scale: float) -> np.ndarray:
    return np.sqrt(scale) * np.sqrt(var)


def close_to_close_sigma(c, window: int, scale: float = 1.0) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if window < 2:
        raise ValueError("close-to-close needs window >= 2")
    _check_len(c.shape[-1], window + 1, "close-to-close")
    r = np.log(c[..., 1:] / c[..., :-1])
    return _finish(_rolling_var(r, window), scale)


def parkinson_sigma(h, l, window: int, scale: float = 1.0) -> np.ndarray:
    h, l = np.asarray(h, dtype=float), np.asarray(l, dtype=float)
    _check_len(h.shape[-1], window, "Parkinson")
    hl = np.log(h / l) ** 2
    return _finish(_rolling_mean(hl, window) / (4.0 * LN2), scale)


def garman_klass_terms(o, h, l, c) -> np.ndarray:
    o, h, l, c = (np.asarray(a, dtype=float) for a in (o, h, l, c))
    return 0.5 * np.log(h / l) ** 2 - GK_CLOSE_COEF * np.log(c / o) ** 2


def garman_klass_sigma(o, h, l, c, window: int, scale: float = 1.0) -> tuple[np.ndarray, int]:
    """Garman-Klass sigma plus the number of windows whose radicand was negative.

    Negative radicands cannot occur for valid bars (``|ln C/O| <= ln H/L``
    keeps each summand >= 0.114 (ln H/L)^2); they are clamped to 0 rather
    than raising.
    """
    terms = garman_klass_terms(o, h, l, c)
    _check_len(terms.shape[-1], window, "Garman-Klass")
    var = _rolling_mean(terms, window)
    neg = var < 0
    return _finish(np.where(neg, 0.0, var), scale), int(neg.sum())


def rogers_satchell_terms(o, h, l, c) -> np.ndarray:
    o, h, l, c = (np.asarray(a, dtype=float) for a in (o, h, l, c))
    ho, lo, co = np.log(h / o), np.log(l / o), np.log(c / o)
    return ho * (ho - co) + lo * (lo - co)


def rogers_satchell_sigma(o, h, l, c, window: int, scale: float = 1.0) -> np.ndarray:
    terms = rogers_satchell_terms(o, h, l, c)
    _check_len(terms.shape[-1], window, "Rogers-Satchell")
    # valid bars give terms >= 0; rounding can leave -1e-20 scale residue
    return _finish(np.maximum(_rolling_mean(terms, window), 0.0), scale)


def yang_zhang_sigma(o, h, l, c, window: int, scale: float = 1.0) -> np.ndarray:
    o, h, l, c = (np.asarray(a, dtype=float) for a in (o, h, l, c))
    if window < 2:
        raise ValueError("Yang-Zhang needs window >= 2")
    _check_len(o.shape[-1], window + 1, "Yang-Zhang")
    k = yang_zhang_k(window)
    overnight = np.log(o[..., 1:] / c[..., :-1])
    open_close = np.log(c[..., 1:] / o[..., 1:])
    rs = rogers_satchell_terms(o[..., 1:], h[..., 1:], l[..., 1:], c[..., 1:])
    var = (
        _rolling_var(overnight, window)
        + k * _rolling_var(open_close, window)
        + (1.0 - k) * _rolling_mean(rs, window)
    )
    return _finish(np.maximum(var, 0.0), scale)


def estimate_arrays(kind: EstimatorKind, o, h, l, c, window: int, scale: float = 1.0):
    """Dispatch to the array-level estimator; returns ``(sigma, clamped)``."""
    if kind is EstimatorKind.CLOSE_TO_CLOSE:
        return close_to_close_sigma(c, window, scale), 0
    if kind is EstimatorKind.PARKINSON:
        return parkinson_sigma(h, l, window, scale), 0
    if kind is EstimatorKind.GARMAN_KLASS:
        return garman_klass_sigma(o, h, l, c, window, scale)
    if kind is EstimatorKind.ROGERS_SATCHELL:
        return rogers_satchell_sigma(o, h, l, c, window, scale), 0
    if kind is EstimatorKind.YANG_ZHANG:
        return yang_zhang_sigma(o, h, l, c, window, scale), 0
    raise ValueError(kind)


def first_index(kind: EstimatorKind, window: int) -> int:
    """Bar index at which the first full window of ``kind`` ends."""
    return window if kind.needs_prev_close else window - 1


def estimate(kind: EstimatorKind, series: OhlcSeries, params: VolParams = VolParams()) -> VolSeries:
    sigma, clamped = estimate_arrays(kind, *series.arrays(), params.window, params.scale)
    dates = series.dates[first_index(kind, params.window):]
    return VolSeries(kind, params, dates, sigma, clamped)


def close_to_close(series: OhlcSeries, params: VolParams = VolParams()) -> VolSeries:
    return estimate(EstimatorKind.CLOSE_TO_CLOSE, series, params)


def parkinson(series: OhlcSeries, params: VolParams = VolParams()) -> VolSeries:
    return estimate(EstimatorKind.PARKINSON, series, params)


def garman_klass(series: OhlcSeries, params: VolParams = VolParams()) -> VolSeries:
    return estimate(EstimatorKind.GARMAN_KLASS, series, params)


def rogers_satchell(series: OhlcSeries, params: VolParams = VolParams()) -> VolSeries:
    return estimate(EstimatorKind.ROGERS_SATCHELL, series, params)


def yang_zhang(series: OhlcSeries, params: VolParams = VolParams()) -> VolSeries:
    return estimate(EstimatorKind.YANG_ZHANG, series, params)


def align(vols: dict[EstimatorKind, VolSeries]) -> dict[EstimatorKind, VolSeries]:
    """Trim every series to the dates common to all of them."""
    common = None
    for v in vols.values():
        common = v.dates if common is None else np.intersect1d(common, v.dates)
    out = {}
    for kind, v in vols.items():
        m = np.isin(v.dates, common)
        out[kind] = VolSeries(kind, v.params, v.dates[m], v.sigma[m], v.clamped)
    return out


def compute_all(series: OhlcSeries, params: VolParams = VolParams(), kinds=None) -> dict[EstimatorKind, VolSeries]:
    kinds = list(EstimatorKind) if kinds is None else list(kinds)
    return align({k: estimate(k, series, params) for k in kinds})
