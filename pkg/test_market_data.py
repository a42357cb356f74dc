#!/usr/bin/env python3
"""
Tests for quote normalization, filters, instantaneous volatility, rolling
windows, panel construction and quote files.

報價標準化、篩選、窗口與面板構建的測試。
"""

import os
import sys
import math

import numpy as np
import pandas as pd
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import config
from src import market_data as md
from src.errors import (ConfigError, DataError, InsufficientPanelError, InsufficientObservationsError,
                        MissingInstantaneousVolError, NoLiquidOptionsError)
from testing_utils import module_tests, run_standalone

T0 = pd.Timestamp("2022-01-23T00:00:00Z")
DAY = 1.0 / config.DAYS_PER_YEAR


def make_quote(strike=100.0, expiry_days=36.5, iv=0.8, spot=100.0, kind="call", ts=T0, name="X"):
    return md.OptionQuote(timestamp=ts, instrument_id=name, expiry=ts + pd.Timedelta(days=expiry_days),
                          strike=strike, option_kind=kind, underlying_price=spot, implied_vol=iv)


def obs(tau_days=3.0, k=0.0, iv=0.8, ts=T0, name="X"):
    return md.IvObservation(timestamp=ts, tau=tau_days * DAY, k=k, iv=iv, instrument_id=name)


def test_normalize_computes_tau_and_log_moneyness():
    result = md.normalize([make_quote(strike=100.0, expiry_days=36.5)], r=0.05, d=0.0)
    assert len(result) == 1
    assert result[0].tau == pytest.approx(0.1)
    assert result[0].k == pytest.approx(-0.005)
    print("✅ tau = 0.1 and k = -r tau at the money")


def test_normalize_rejects_bad_quotes():
    quotes = [make_quote(), make_quote(expiry_days=0.0, name="EXP"), make_quote(iv=0.0, name="ZERO"),
              make_quote(strike=-1.0, name="NEG")]
    observations, rejected = md.normalize_with_rejections(quotes, 0.0, 0.0)
    assert len(observations) == 1
    assert [(r.index, r.reason) for r in rejected] == [
        (1, md.EXPIRED), (2, md.NON_POSITIVE_IV), (3, md.NON_POSITIVE_STRIKE)]
    with pytest.warns(UserWarning, match="rejected 3 quotes"):
        md.normalize(quotes, 0.0, 0.0)
    print("✅ Rejections collected with reason codes")


def test_normalize_errors():
    with pytest.raises(DataError):
        md.normalize([], 0.0, 0.0)
    with pytest.raises(ConfigError):
        md.normalize([make_quote()], float("nan"), 0.0)


def random_quotes(n=100, seed=0):
    rng = np.random.default_rng(seed)
    quotes = []
    for i in range(n):
        ts = T0 + pd.Timedelta(minutes=int(rng.integers(0, 7 * 24 * 60)))
        expiry = ts + pd.Timedelta(seconds=int(rng.integers(3600, 200 * 86400)))
        quotes.append(md.OptionQuote(timestamp=ts, instrument_id=f"Q{i:03d}", expiry=expiry,
                                     strike=float(rng.uniform(20_000, 80_000)),
                                     option_kind="call" if i % 2 else "put",
                                     underlying_price=float(rng.uniform(30_000, 60_000)),
                                     implied_vol=float(rng.uniform(0.3, 1.5))))
    return quotes


def test_normalize_matches_independent_recomputation():
    r, d = 0.03, 0.01
    quotes = random_quotes()
    result = md.normalize(quotes, r, d)
    assert len(result) == len(quotes)
    for q, o in zip(quotes, result):
        tau = (q.expiry - q.timestamp) / pd.Timedelta(days=365)
        assert o.tau == pytest.approx(tau, rel=1e-12)
        assert o.k == pytest.approx(np.log(q.strike) - np.log(q.underlying_price) - (r - d) * tau, abs=1e-12)
        # strike recovered from the forward and log-moneyness
        forward = q.underlying_price * math.exp((r - d) * o.tau)
        assert forward * math.exp(o.k) == pytest.approx(q.strike, rel=1e-10)
        assert (o.timestamp, o.iv, o.instrument_id) == (q.timestamp, q.implied_vol, q.instrument_id)


def test_clustering_filter_boundaries_are_inclusive():
    kept = md.filter_for_clustering([
        obs(tau_days=7.0, k=math.log(0.8), name="low"),
        obs(tau_days=7.0, k=math.log(1.2), name="high"),
        obs(tau_days=7.0, k=math.log(1.21), name="outside"),
        obs(tau_days=7.5, k=0.0, name="long"),
    ], (0.8, 1.2), 7.0)
    assert [o.instrument_id for o in kept] == ["low", "high"]
    with pytest.raises(NoLiquidOptionsError):
        md.filter_for_clustering([obs(tau_days=30.0)], (0.8, 1.2), 7.0)
    print("✅ Moneyness and maturity limits inclusive")


def test_isvm_filter_uses_v_sqrt_tau_band():
    v = 0.5
    edge = v * math.sqrt(30.0 * DAY)
    kept = md.filter_for_isvm([
        obs(tau_days=30.0, k=edge, name="edge"),
        obs(tau_days=30.0, k=-1.01 * edge, name="wide"),
        obs(tau_days=5.0, k=0.0, name="short"),
        obs(tau_days=60.0, k=0.0, name="long"),
        obs(tau_days=4.9, k=0.0, name="too_short"),
    ], (5.0, 60.0), {T0: v})
    assert [o.instrument_id for o in kept] == ["edge", "short", "long"]
    with pytest.raises(MissingInstantaneousVolError):
        md.filter_for_isvm([obs()], (5.0, 60.0), {})


def test_filters_are_idempotent():
    observations = md.normalize(random_quotes(seed=1), 0.0, 0.0)
    v_by_timestamp = md.instantaneous_vols(observations)
    once = md.filter_for_isvm(observations, (1.0, 120.0), v_by_timestamp)
    assert 0 < len(once) < len(observations)
    assert md.filter_for_isvm(once, (1.0, 120.0), v_by_timestamp) == once

    liquid = md.filter_for_clustering(observations, (0.8, 1.2), 60.0)
    assert md.filter_for_clustering(liquid, (0.8, 1.2), 60.0) == liquid


def test_instantaneous_vol_picks_closest_to_origin():
    group = [obs(tau_days=30.0, k=0.0, iv=0.9, name="a"),
             obs(tau_days=3.0, k=0.1, iv=0.7, name="b"),
             obs(tau_days=3.0, k=0.01, iv=0.6, name="c")]
    assert md.estimate_instantaneous_vol(group) == 0.6
    # equal distance: smaller |k| at equal tau, then instrument id
    tie = [obs(tau_days=3.0, k=0.1, iv=0.5, name="z"), obs(tau_days=3.0, k=-0.1, iv=0.4, name="y")]
    assert md.estimate_instantaneous_vol(tie) == 0.4
    with pytest.raises(InsufficientObservationsError):
        md.estimate_instantaneous_vol([])


def test_rolling_windows_cover_full_windows_only():
    spec = md.RollingWindowSpec.from_minutes(7200, 1440, 20)
    grid = md.sampling_grid(T0, T0 + pd.Timedelta(days=7), spec.sampling_interval)
    assert len(grid) == 504
    assert md.window_count(spec) == 360
    assert md.rolling_windows(grid, spec) == [(0, 360), (72, 432), (144, 504)]
    assert md.rolling_windows(grid[:359], spec) == []
    with pytest.raises(ConfigError):
        md.RollingWindowSpec.from_minutes(7210, 1440, 20)
    print("✅ Three 5-day windows in a 7-day horizon")


def _panel_observations():
    spec = md.RollingWindowSpec.from_minutes(100, 20, 20)
    ts = [T0 + i * spec.sampling_interval for i in range(5)]
    pattern = {"A": [0, 1, 2, 3, 4], "B": [0, 2], "C": [1, 2, 3, 4], "D": [0, 1, 3, 4]}
    observations = [obs(iv=0.5 + 0.1 * i + 0.01 * ord(name[0]), ts=ts[i], name=name)
                    for name, present in pattern.items() for i in present]
    return spec, ts, observations


def test_build_panel_drops_sparse_rows_and_fills_gaps():
    spec, ts, observations = _panel_observations()
    panel = md.build_panel(observations, spec, 0.66, start=ts[0])
    assert panel.asset_ids == ["A", "C", "D"]
    assert panel.n_timestamps == 5
    assert not np.isnan(panel.values).any()
    c_row = panel.values[1]
    d_row = panel.values[2]
    assert c_row[0] == pytest.approx(c_row[1])  # backward filled
    assert d_row[2] == pytest.approx(d_row[1])  # forward filled
    assert panel.mask[1].tolist() == [False, True, True, True, True]
    assert panel.observations().shape == (5, 3)
    print("✅ Row B dropped, gaps imputed")


def test_build_panel_errors():
    spec, ts, observations = _panel_observations()
    only_a = [o for o in observations if o.instrument_id == "A"]
    with pytest.raises(InsufficientPanelError):
        md.build_panel(only_a, spec, 0.66, start=ts[0])
    off_grid = observations + [obs(ts=ts[0] + pd.Timedelta(minutes=10), name="A")]
    with pytest.raises(DataError):
        md.build_panel(off_grid, spec, 0.66, start=ts[0])


def test_parse_deribit_instrument():
    underlying, expiry, strike, kind = md.parse_deribit_instrument("BTC-25MAR22-40000-C")
    assert underlying == "BTC"
    assert expiry == pd.Timestamp("2022-03-25T08:00:00Z")
    assert strike == 40000.0
    assert kind == "call"
    assert md.parse_deribit_instrument("ETH-1APR22-3000-P")[3] == "put"
    with pytest.raises(DataError):
        md.parse_deribit_instrument("BTC-PERPETUAL")


def test_quote_file_round_trip(tmp_path):
    quotes = [make_quote(strike=95.0, kind="put", name="P95"), make_quote(strike=105.0, name="C105")]
    path = os.path.join(str(tmp_path), "quotes.csv")
    md.write_quotes(path, quotes, config_hash="abc")
    with open(path) as f:
        assert f.readline().strip() == "# config_hash: abc"
    loaded = md.read_quotes(path)
    assert [q.instrument_id for q in loaded] == ["P95", "C105"]
    assert loaded[0].option_kind == "put"
    assert loaded[1].expiry == quotes[1].expiry
    assert loaded[1].implied_vol == pytest.approx(0.8)


def test_quote_file_with_venue_names(tmp_path):
    path = os.path.join(str(tmp_path), "venue.csv")
    with open(path, "w") as f:
        f.write("timestamp,instrument,expiry,strike,kind,underlying_price,implied_vol\n")
        f.write("2022-01-23T00:00:00Z,BTC-28JAN22-36000-P,,,,35000,0.85\n")
    quote = md.read_quotes(path)[0]
    assert quote.strike == 36000.0
    assert quote.option_kind == "put"
    assert quote.expiry == pd.Timestamp("2022-01-28T08:00:00Z")
    with pytest.raises(DataError):
        md.read_quotes(os.path.join(str(tmp_path), "missing.csv"))


def test_panel_file_round_trip(tmp_path):
    spec, ts, observations = _panel_observations()
    panel = md.build_panel(observations, spec, 0.66, start=ts[0])
    path = os.path.join(str(tmp_path), "panels", "window_000.csv")
    md.write_panel(panel, path, "abc")
    loaded = md.read_panel(path)
    assert loaded.asset_ids == panel.asset_ids
    assert list(loaded.timestamps) == list(panel.timestamps)
    np.testing.assert_allclose(loaded.values, panel.values, rtol=1e-11)
    np.testing.assert_array_equal(loaded.mask, panel.mask)


def main():
    return run_standalone("Testing Market Data", module_tests(globals()))


if __name__ == "__main__":
    sys.exit(main())
