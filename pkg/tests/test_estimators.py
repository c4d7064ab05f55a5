import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rangevol import estimators as E
from rangevol.estimators import EstimatorKind, InsufficientDataError, VolParams, compute_all, estimate
from rangevol.market_data import OhlcSeries

import oracles
from conftest import random_ohlc

ORACLE = {
    EstimatorKind.CLOSE_TO_CLOSE: lambda o, h, l, c, n, f: oracles.close_to_close(c, n, f),
    EstimatorKind.PARKINSON: lambda o, h, l, c, n, f: oracles.parkinson(h, l, n, f),
    EstimatorKind.GARMAN_KLASS: oracles.garman_klass,
    EstimatorKind.ROGERS_SATCHELL: oracles.rogers_satchell,
    EstimatorKind.YANG_ZHANG: oracles.yang_zhang,
}


def bars(o, h, l, c, ticker="X"):
    n = len(o)
    dates = np.busday_offset(np.datetime64("2008-01-02"), np.arange(n), roll="forward")
    return OhlcSeries(ticker, dates, o, h, l, c)


def lists(s):
    return [a.tolist() for a in s.arrays()]


def test_five_kinds_and_aliases():
    assert len(EstimatorKind) == 5
    assert EstimatorKind.parse("yz") is EstimatorKind.YANG_ZHANG
    assert EstimatorKind.parse("garman_klass") is EstimatorKind.GARMAN_KLASS
    with pytest.raises(ValueError):
        EstimatorKind.parse("ewma")


@pytest.mark.parametrize("kind", list(EstimatorKind))
def test_matches_oracle(kind, rng):
    for _ in range(20):
        s = random_ohlc(rng, 30)
        n = int(rng.integers(2, 12))
        got = estimate(kind, s, VolParams(n, 1.0)).sigma
        want = ORACLE[kind](*lists(s), n, 1.0)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=0)


def test_constant_prices_give_zero():
    s = bars(*[np.full(40, 100.0)] * 4)
    vols = compute_all(s, VolParams(21, 1.0))
    for v in vols.values():
        assert np.all(v.sigma == 0.0)


def test_cc_small_example():
    c = np.array([100, 101, 100, 101, 100.0])
    s = bars(c, c, c, c)
    got = E.close_to_close(s, VolParams(4, 1.0)).sigma
    r = [math.log(101 / 100), math.log(100 / 101)] * 2
    m = sum(r) / 4
    assert got.tolist() == pytest.approx([math.sqrt(sum((x - m) ** 2 for x in r) / 3)], rel=1e-14)
    got252 = E.close_to_close(s, VolParams(4, 252.0)).sigma
    assert got252[0] == pytest.approx(math.sqrt(252) * got[0], rel=1e-15)


def test_single_bar_examples():
    o = np.array([100.0])
    h, l = o * math.exp(0.01), o * math.exp(-0.01)
    s = bars(o, h, l, o)
    p = VolParams(1, 1.0)
    assert E.parkinson(s, p).sigma[0] == pytest.approx(0.0120112, abs=5e-8)
    assert E.parkinson(s, p).sigma[0] == pytest.approx(0.02 / (2 * math.sqrt(math.log(2))), rel=1e-13)
    assert E.garman_klass(s, p).sigma[0] == pytest.approx(0.0141421, abs=5e-8)
    assert E.rogers_satchell(s, p).sigma[0] == pytest.approx(math.sqrt(0.0002), rel=1e-13)


def test_yang_zhang_k():
    assert E.yang_zhang_k(21) == pytest.approx(0.34 / 2.44, rel=1e-15)
    assert round(E.yang_zhang_k(21), 6) == 0.139344


def test_gk_negative_radicand_clamped():
    # H = L with C != O cannot be a valid bar; the clamp is exercised on raw arrays
    o, c = np.array([100.0]), np.array([101.0])
    sigma, clamped = E.garman_klass_sigma(o, o, o, c, 1)
    assert sigma.tolist() == [0.0] and clamped == 1


def test_gk_clamp_count_zero_on_valid_bars(rng):
    s = random_ohlc(rng, 200)
    assert estimate(EstimatorKind.GARMAN_KLASS, s, VolParams(5, 1.0)).clamped == 0


def test_rs_close_at_high():
    o = np.array([100.0])
    h, l = o * 1.02, o * 0.97
    s = bars(o, h, l, h)
    d = math.log(0.97)
    want = math.sqrt(d * (d - math.log(1.02)))
    assert E.rogers_satchell(s, VolParams(1, 1.0)).sigma[0] == pytest.approx(want, rel=1e-14)


def test_yz_without_gaps_or_body(rng):
    # O_t = C_{t-1} and C_t = O_t: only the RS part survives
    n_bars, n = 40, 21
    o = np.full(n_bars, 50.0)
    h = o * np.exp(rng.uniform(0, 0.02, n_bars))
    l = o * np.exp(-rng.uniform(0, 0.02, n_bars))
    s = bars(o, h, l, o)
    k = E.yang_zhang_k(n)
    rs = E.rogers_satchell(s, VolParams(n, 1.0)).sigma[1:]
    yz = E.yang_zhang(s, VolParams(n, 1.0)).sigma
    np.testing.assert_allclose(yz, np.sqrt(1 - k) * rs, rtol=1e-12)


def test_dating_and_lengths(rng):
    s = random_ohlc(rng, 100)
    p = VolParams(21, 252.0)
    assert len(estimate(EstimatorKind.PARKINSON, s, p)) == 80
    assert len(estimate(EstimatorKind.YANG_ZHANG, s, p)) == 79
    # value dated at the window's last bar
    assert estimate(EstimatorKind.PARKINSON, s, p).dates[0] == s.dates[20]
    assert estimate(EstimatorKind.CLOSE_TO_CLOSE, s, p).dates[0] == s.dates[21]
    vols = compute_all(s, p)
    # window-arithmetic oracle: 100 bars, 21 returns need 22 bars -> 100 - 21
    assert {len(v) for v in vols.values()} == {100 - 21}
    dates = {tuple(v.dates.tolist()) for v in vols.values()}
    assert len(dates) == 1


def test_too_short():
    c = np.full(21, 100.0)
    with pytest.raises(InsufficientDataError):
        E.close_to_close(bars(c, c, c, c), VolParams(21))
    assert len(E.parkinson(bars(c, c, c, c), VolParams(21))) == 1


def test_params_validation():
    with pytest.raises(ValueError):
        VolParams(0)
    with pytest.raises(ValueError):
        VolParams(21, 0.0)
    c = np.full(5, 100.0)
    with pytest.raises(ValueError):
        E.close_to_close(bars(c, c, c, c), VolParams(1))


def test_vol_csv(tmp_path, rng):
    v = estimate(EstimatorKind.YANG_ZHANG, random_ohlc(rng, 40), VolParams(21, 252.0))
    v.to_csv(tmp_path / "v.csv")
    lines = (tmp_path / "v.csv").read_text().splitlines()
    assert lines[0] == "date,sigma" and len(lines) == len(v) + 1
    assert float(lines[1].split(",")[1]) == v.sigma[0]


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.01, 1e4), st.sampled_from(list(EstimatorKind)))
def test_scaling_law(seed, f, kind):
    s = random_ohlc(np.random.default_rng(seed), 30)
    base = estimate(kind, s, VolParams(10, 1.0)).sigma
    scaled = estimate(kind, s, VolParams(10, f)).sigma
    np.testing.assert_allclose(scaled, math.sqrt(f) * base, rtol=1e-14, atol=0)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(1e-3, 1e3), st.sampled_from(list(EstimatorKind)))
def test_price_scale_invariance(seed, k, kind):
    s = random_ohlc(np.random.default_rng(seed), 30)
    t = OhlcSeries(s.ticker, s.dates, *(a * k for a in s.arrays()))
    a = estimate(kind, s, VolParams(10, 1.0)).sigma
    b = estimate(kind, t, VolParams(10, 1.0)).sigma
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_parkinson_ignores_open_and_close(seed):
    rng = np.random.default_rng(seed)
    s = random_ohlc(rng, 30)
    _, h, l, _ = s.arrays()
    o2 = l + (h - l) * rng.random(30)
    c2 = l + (h - l) * rng.random(30)
    t = OhlcSeries(s.ticker, s.dates, o2, h, l, c2)
    p = VolParams(10, 1.0)
    np.testing.assert_array_equal(E.parkinson(s, p).sigma, E.parkinson(t, p).sigma)


def test_rogers_satchell_depends_on_close():
    # u(u - k) + d(d - k) with k = ln(C/O): moving C inside [L, H] changes it
    o, h, l = np.array([100.0]), np.array([102.0]), np.array([98.0])
    at_open = E.rogers_satchell_terms(o, h, l, o)[0]
    at_high = E.rogers_satchell_terms(o, h, l, h)[0]
    assert at_open == pytest.approx(math.log(1.02) ** 2 + math.log(0.98) ** 2, rel=1e-14)
    assert at_high == pytest.approx(math.log(0.98) * (math.log(0.98) - math.log(1.02)), rel=1e-14)
    assert at_open != at_high


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_outputs_and_rs_terms_nonnegative(seed):
    s = random_ohlc(np.random.default_rng(seed), 30)
    assert np.all(E.rogers_satchell_terms(*s.arrays()) >= 0)
    for v in compute_all(s, VolParams(5, 1.0)).values():
        assert np.all(v.sigma >= 0) and np.all(np.isfinite(v.sigma))
