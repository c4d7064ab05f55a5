"""Regenerate tests/data/DJI.csv, a synthetic ten-year DJIA-like index.

Trading days follow the NYSE holiday calendar for 2008-01-02..2017-12-29
(2518 sessions). Daily volatility is a log-AR(1) regime path (about 4% to 70%
annualised) with a crisis hump in late 2008; intraday paths have 390 one-minute steps and small
overnight gaps.

    python scripts/make_fixture.py [--out tests/data/DJI.csv]
"""

import argparse
from pathlib import Path

import numpy as np
import pandas as pd
from pandas.tseries.holiday import (
    AbstractHolidayCalendar,
    GoodFriday,
    Holiday,
    USLaborDay,
    USMartinLutherKingJr,
    USMemorialDay,
    USPresidentsDay,
    USThanksgivingDay,
    nearest_workday,
)

from rangevol.gbm import GbmConfig, log_ou_sigma_path, simulate


class NyseCalendar(AbstractHolidayCalendar):
    rules = [
        Holiday("New Year", month=1, day=1, observance=nearest_workday),
        USMartinLutherKingJr,
        USPresidentsDay,
        GoodFriday,
        USMemorialDay,
        Holiday("Independence Day", month=7, day=4, observance=nearest_workday),
        USLaborDay,
        USThanksgivingDay,
        Holiday("Christmas", month=12, day=25, observance=nearest_workday),
    ]


def nyse_sessions(start="2008-01-02", end="2017-12-29") -> pd.DatetimeIndex:
    days = pd.bdate_range(start, end)
    holidays = NyseCalendar().holidays(start, end)
    # NYSE does not observe a Saturday New Year on the prior Friday
    holidays = holidays[~((holidays.month == 12) & (holidays.day == 31))]
    closures = pd.to_datetime(["2012-10-29", "2012-10-30"])  # Hurricane Sandy
    return days[~days.isin(holidays) & ~days.isin(closures)]


def djia_like(seed: int = 1):
    dates = nyse_sessions()
    n = len(dates)
    sigma = log_ou_sigma_path(n, level=0.14, log_sd=0.45, half_life=120, seed=seed)
    t = np.arange(n)
    sigma *= np.exp(1.6 * np.exp(-0.5 * ((t - 200) / 45.0) ** 2))
    cfg = GbmConfig(sigma_true=0.15, mu=0.03, jump_sigma=0.04, steps_per_day=390,
                    days=n, seed=seed, s0=13000.0)
    return simulate(cfg, sigma_path=sigma, ticker="DJI", dates=dates.values.astype("datetime64[D]"))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=Path(__file__).resolve().parents[1] / "tests" / "data" / "DJI.csv")
    args = ap.parse_args()
    series = djia_like()
    frame = series.to_frame().round(4)
    frame["Adj Close"] = frame["Close"]
    frame["Volume"] = 0
    frame.to_csv(args.out, index=False)
    print(f"wrote {len(frame)} rows to {args.out}")


if __name__ == "__main__":
    main()
