"""Geometric Brownian motion OHLC generator and estimator bias oracle.

Each simulated day starts with an optional lognormal opening gap from the
previous close, followed by ``steps_per_day`` lognormal increments. The bar's
open and close are the first and last sampled prices and the high and low
are the extremes over the sampled points, so ranges are slightly attenuated
relative to continuous monitoring. :func:`expected_sigma` gives the
first-order size of that attenuation.

Rates are annualised on a 252-day year.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, replace

import numpy as np

from .estimators import EstimatorKind, estimate_arrays, yang_zhang_k
from .market_data import OhlcSeries

TRADING_DAYS = 252
# discrete-monitoring shift of a Brownian maximum, -zeta(1/2)/sqrt(2 pi)
BROADIE_BETA = 0.5825971579390106
_CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class GbmConfig:
    sigma_true: float = 0.2
    mu: float = 0.0
    jump_sigma: float = 0.0
    steps_per_day: int = 390
    days: int = 252
    seed: int = 0
    s0: float = 100.0
    start: dt.date = dt.date(2008, 1, 2)

    def __post_init__(self):
        if not self.sigma_true > 0:
            raise ValueError("sigma_true must be positive")
        if self.jump_sigma < 0:
            raise ValueError("jump_sigma must be >= 0")
        if self.steps_per_day < 1 or self.days < 1:
            raise ValueError("steps_per_day and days must be >= 1")
        if not self.s0 > 0:
            raise ValueError("s0 must be positive")

    @property
    def total_sigma(self) -> float:
        """Annualised volatility of close-to-close returns, gaps included."""
        return math.hypot(self.sigma_true, self.jump_sigma)


def _simulate_chunk(cfg: GbmConfig, n_paths: int, rng, sigma_path) -> tuple[np.ndarray, ...]:
    days, steps = cfg.days, cfg.steps_per_day
    dt_step = 1.0 / (TRADING_DAYS * steps)
    sd = (cfg.sigma_true if sigma_path is None else np.asarray(sigma_path, float)) * math.sqrt(dt_step)
    sd = np.broadcast_to(sd, (days,))
    drift = cfg.mu * dt_step
    gap_sd = cfg.jump_sigma / math.sqrt(TRADING_DAYS)

    # log prices relative to s0, so an all-zero path prices exactly at s0
    log_o = np.empty((n_paths, days))
    log_h = np.empty((n_paths, days))
    log_l = np.empty((n_paths, days))
    log_c = np.empty((n_paths, days))
    prev = np.zeros(n_paths)
    block = max(1, _CHUNK_ELEMENTS // (n_paths * steps))
    for d0 in range(0, days, block):
        d1 = min(days, d0 + block)
        gaps = gap_sd * rng.standard_normal((n_paths, d1 - d0)) if gap_sd > 0 else np.zeros((n_paths, d1 - d0))
        inc = rng.standard_normal((n_paths, d1 - d0, steps))
        inc *= sd[d0:d1, None]
        inc += drift
        path = np.cumsum(inc, axis=-1)
        hi = np.maximum(path.max(axis=-1), 0.0)
        lo = np.minimum(path.min(axis=-1), 0.0)
        for j, d in enumerate(range(d0, d1)):
            # sequential so that a zero gap gives open == previous close exactly
            o = prev + gaps[:, j]
            log_o[:, d] = o
            log_h[:, d] = o + hi[:, j]
            log_l[:, d] = o + lo[:, j]
            prev = o + path[:, j, -1]
            log_c[:, d] = prev
    o, h, l, c = (cfg.s0 * np.exp(a) for a in (log_o, log_h, log_l, log_c))
    # exp of the shared offset can round the extremes inside open/close
    h = np.maximum(h, np.maximum(o, c))
    l = np.minimum(l, np.minimum(o, c))
    return o, h, l, c


def simulate_arrays(cfg: GbmConfig, n_paths: int = 1, sigma_path=None) -> tuple[np.ndarray, ...]:
    """Simulate ``n_paths`` independent paths; returns ``(open, high, low, close)``.

    Each array has shape ``(n_paths, days)``. Paths are drawn in fixed-size
    chunks, each from its own stream seeded by ``(seed, chunk_index)``.
    ``sigma_path`` optionally replaces ``sigma_true`` with a per-day
    annualised volatility of length ``days``.
    """
    if sigma_path is not None and np.shape(sigma_path) != (cfg.days,):
        raise ValueError(f"sigma_path must have length {cfg.days}")
    per_chunk = max(1, _CHUNK_ELEMENTS // (cfg.days * cfg.steps_per_day))
    parts = []
    for chunk, p0 in enumerate(range(0, n_paths, per_chunk)):
        rng = np.random.default_rng([cfg.seed, chunk])
        parts.append(_simulate_chunk(cfg, min(per_chunk, n_paths - p0), rng, sigma_path))
    return tuple(np.concatenate([p[i] for p in parts], axis=0) for i in range(4))


def business_days(start, n: int) -> np.ndarray:
    return np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")


def simulate(cfg: GbmConfig, sigma_path=None, ticker: str = "SIM", dates=None) -> OhlcSeries:
    """One simulated path as an :class:`OhlcSeries` dated on business days from ``cfg.start``."""
    o, h, l, c = (a[0] for a in simulate_arrays(cfg, 1, sigma_path))
    if dates is None:
        dates = business_days(cfg.start, cfg.days)
    elif len(dates) != cfg.days:
        raise ValueError("dates must have one entry per simulated day")
    return OhlcSeries(ticker, dates, o, h, l, c)


def log_ou_sigma_path(days: int, level: float = 0.18, log_sd: float = 0.45,
                      half_life: float = 40.0, seed: int = 0) -> np.ndarray:
    """Daily annualised volatilities whose logarithm is a stationary AR(1).

    Vol is constant within a day; this only varies the regime from one day
    to the next, e.g. for multi-year fixtures with calm and turbulent spells.
    """
    rng = np.random.default_rng(seed)
    phi = 0.5 ** (1.0 / half_life)
    eps = rng.standard_normal(days) * log_sd * math.sqrt(1.0 - phi * phi)
    x = np.empty(days)
    x[0] = rng.standard_normal() * log_sd
    for t in range(1, days):
        x[t] = phi * x[t - 1] + eps[t]
    return level * np.exp(x)


def _range_factor(n: int) -> float:
    """First-order E[sampled range^2] / E[continuous range^2] for n steps."""
    b = BROADIE_BETA
    return 1.0 - 2.0 * b * math.sqrt(2.0 / math.pi) / (math.log(2.0) * math.sqrt(n)) + b * b / (math.log(2.0) * n)


def _rs_factor(n: int) -> float:
    b = BROADIE_BETA
    return 1.0 - 4.0 * b * math.sqrt(2.0 / math.pi) / math.sqrt(n) + 2.0 * b * b / n


def expected_sigma(kind: EstimatorKind, cfg: GbmConfig, window: int = 21) -> float:
    """Square root of the estimator's expected variance under ``cfg`` with drift 0.

    Accounts for discrete monitoring of the intraday extremes to first order
    in ``1/sqrt(steps_per_day)`` (Broadie-Glasserman-Kou shift). Ignores the
    Jensen gap between E[sigma] and sqrt(E[variance]).
    """
    n = cfg.steps_per_day
    s2, j2 = cfg.sigma_true ** 2, cfg.jump_sigma ** 2
    if kind is EstimatorKind.CLOSE_TO_CLOSE:
        var = s2 + j2
    elif kind is EstimatorKind.PARKINSON:
        var = s2 * _range_factor(n)
    elif kind is EstimatorKind.GARMAN_KLASS:
        var = s2 * (2 * math.log(2.0) * _range_factor(n) - (2 * math.log(2.0) - 1))
    elif kind is EstimatorKind.ROGERS_SATCHELL:
        var = s2 * _rs_factor(n)
    else:
        k = yang_zhang_k(window)
        var = j2 + k * s2 + (1 - k) * s2 * _rs_factor(n)
    return math.sqrt(var)


def window_estimates(cfg: GbmConfig, n_windows: int, window: int = 21, scale: float = TRADING_DAYS):
    """One estimate per independent ``window``-day path, for each estimator.

    Every path has ``window + 1`` days so the estimators that need the
    previous close see exactly ``window`` returns; all estimators use the
    same final ``window`` bars.
    """
    o, h, l, c = simulate_arrays(replace(cfg, days=window + 1), n_windows)
    out = {}
    for kind in EstimatorKind:
        sigma, _ = estimate_arrays(kind, o, h, l, c, window, scale)
        out[kind] = sigma[:, -1]
    return out


@dataclass(frozen=True)
class BiasEntry:
    scenario: str
    estimator: EstimatorKind
    mean_sigma: float
    bias: float
    """mean(sigma_hat) / total_sigma - 1"""
    stderr: float
    """standard error of ``bias``"""
    n_windows: int


def scenario_estimates(scenarios: dict[str, GbmConfig], n_windows: int = 10_000,
                       window: int = 21) -> dict[str, dict[EstimatorKind, np.ndarray]]:
    """:func:`window_estimates` for every scenario."""
    if not scenarios:
        raise ValueError("no scenarios")
    return {name: window_estimates(cfg, n_windows, window) for name, cfg in scenarios.items()}


def bias_table(scenarios: dict[str, GbmConfig], n_windows: int = 10_000, window: int = 21,
               estimates=None) -> list[BiasEntry]:
    """Mean relative bias of every estimator in every scenario.

    The reference volatility is ``cfg.total_sigma``, i.e. intraday and
    overnight variance combined. ``estimates`` reuses the output of
    :func:`scenario_estimates`.
    """
    if estimates is None:
        estimates = scenario_estimates(scenarios, n_windows, window)
    rows = []
    for name, cfg in scenarios.items():
        truth = cfg.total_sigma
        for kind, s in estimates[name].items():
            rows.append(BiasEntry(
                name, kind, float(s.mean()), float(s.mean() / truth - 1.0),
                float(s.std(ddof=1) / math.sqrt(len(s)) / truth), len(s),
            ))
    return rows


def variance_bias(scenarios: dict[str, GbmConfig], estimates, baseline: str = "baseline") -> dict:
    """Relative variance bias against a sampling-matched reference.

    For each non-baseline scenario and estimator returns ``(bias, stderr)``
    with ``bias = mean(sigma_hat^2) / (jump_sigma^2 + B) - 1``, where ``B``
    is the same estimator's mean variance in the driftless, gapless baseline.
    ``B`` carries the estimator's sampled-range attenuation of the intraday
    variance, so a value of 0 means the scenario's drift or opening gaps
    leave the estimator as accurate as it is in the baseline. Working with
    variances avoids the Jensen gap of averaging square roots.
    """
    if baseline not in scenarios:
        raise ValueError(f"no baseline scenario {baseline!r}")
    ref = scenarios[baseline]
    if ref.mu != 0 or ref.jump_sigma != 0:
        raise ValueError("baseline must have no drift and no jumps")
    out = {}
    for name, cfg in scenarios.items():
        if name == baseline:
            continue
        if cfg.sigma_true != ref.sigma_true or cfg.steps_per_day != ref.steps_per_day:
            raise ValueError(f"scenario {name!r} must share sigma_true and steps_per_day with the baseline")
        for kind, s in estimates[name].items():
            a, b = s ** 2, estimates[baseline][kind] ** 2
            A, B = float(a.mean()), float(b.mean())
            se_a = float(a.std(ddof=1)) / math.sqrt(len(a))
            se_b = float(b.std(ddof=1)) / math.sqrt(len(b))
            D = cfg.jump_sigma ** 2 + B
            out[(name, kind)] = (A / D - 1.0, (A / D) * math.hypot(se_a / A, se_b / D))
    return out


def default_scenarios(sigma: float = 0.2, steps_per_day: int = 1000, seed: int = 0) -> dict[str, GbmConfig]:
    """No-drift no-jump baseline plus the large-drift and large-jump cases.

    The drift is 10x sigma per year, about 0.63 daily standard deviations
    per day; the jump case gives the overnight gap the same volatility as
    the intraday path.
    """
    base = GbmConfig(sigma_true=sigma, steps_per_day=steps_per_day, seed=seed)
    return {
        "baseline": base,
        "large_drift": replace(base, mu=10 * sigma, seed=seed + 1),
        "large_jump": replace(base, jump_sigma=sigma, seed=seed + 2),
    }
