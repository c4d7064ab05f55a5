import random
from pathlib import Path

import numpy as np
import pytest

from rangevol.market_data import OhlcSeries

DATA = Path(__file__).parent / "data"
_ACCEPTANCE: list[tuple[str, str, str]] = []


def random_ohlc(rng: np.random.Generator, n: int, start="2010-01-04", ticker="RND") -> OhlcSeries:
    """Random valid bars: lognormal walk with gaps and intraday extremes around O and C."""
    c_prev = 100.0 * np.exp(np.cumsum(rng.normal(0, 0.02, n)))
    o = c_prev * np.exp(rng.normal(0, 0.005, n))
    c = o * np.exp(rng.normal(0, 0.015, n))
    h = np.maximum(o, c) * np.exp(rng.exponential(0.006, n))
    l = np.minimum(o, c) * np.exp(-rng.exponential(0.006, n))
    dates = np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")
    return OhlcSeries(ticker, dates, o, h, l, c)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def pyrng():
    return random.Random(12345)


@pytest.fixture(scope="session")
def dji_path():
    return DATA / "DJI.csv"


@pytest.fixture
def record():
    """Record one acceptance outcome; the summary is printed at the end of the run."""

    def _record(criterion: str, passed: bool | None, detail: str = ""):
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        _ACCEPTANCE.append((criterion, status, detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, status, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{status} {crit}: {detail}")
