"""
Unit tests for trailing-window range detection.
"""
from datetime import date, timedelta

import pytest

from core.tunnel_engine.exceptions import BacktestInputError
from core.tunnel_engine.market_data import OhlcBar
from core.tunnel_engine.range_detect import (NoRange, NoRangeReason,
                                             RangeConfig, detect_range,
                                             range_width)
from core.tunnel_engine.reference_events import range_bars
from core.tunnel_engine.tunneling_core import RangeBound


def _bars_from_closes(closes, spread=0.5, start=date(2020, 1, 1)):
    return [
        OhlcBar(start + timedelta(days=i), close, close + spread, close - spread, close)
        for i, close in enumerate(closes)
    ]


@pytest.fixture
def lnkd_window():
    """Twenty bars oscillating between 123.3 and 127.2."""
    return range_bars(123.3, 127.2, date(2013, 2, 7), 20)


class TestRangeConfig:

    def test_defaults(self):
        cfg = RangeConfig()
        assert (cfg.window, cfg.touch_count, cfg.tolerance) == (20, 2, 0.005)

    @pytest.mark.parametrize('kwargs', [
        {'touch_count': 1},
        {'window': 3, 'touch_count': 2},
        {'tolerance': 0.0},
        {'tolerance': 0.05},
        {'window': 20.0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            RangeConfig(**kwargs)


class TestDetectRange:

    def test_lnkd_levels(self, lnkd_window):
        detected = detect_range(lnkd_window)
        assert isinstance(detected, RangeBound)
        assert detected.support == 123.3
        assert detected.resistance == 127.2
        assert detected.width == pytest.approx(3.9)

    def test_monotone_closes_are_trending(self):
        bars = _bars_from_closes([100.0 + i for i in range(20)])
        detected = detect_range(bars)
        assert isinstance(detected, NoRange)
        assert detected.reason is NoRangeReason.TRENDING

    def test_identical_bars_are_degenerate(self):
        bars = [OhlcBar(date(2020, 1, 1) + timedelta(days=i), 50.0, 50.0, 50.0, 50.0) for i in range(20)]
        detected = detect_range(bars)
        assert isinstance(detected, NoRange)
        assert detected.reason is NoRangeReason.BREACHED_WINDOW

    def test_single_spike_lacks_touches(self, lnkd_window):
        spiked = list(lnkd_window)
        last = spiked[-1]
        spiked[-1] = OhlcBar(last.timestamp, last.open, 130.0, last.low, last.close)
        detected = detect_range(spiked)
        assert isinstance(detected, NoRange)
        assert detected.reason is NoRangeReason.INSUFFICIENT_TOUCHES

    def test_short_series(self, lnkd_window):
        with pytest.raises(BacktestInputError):
            detect_range(lnkd_window[:10])

    def test_empty_series(self):
        with pytest.raises(BacktestInputError):
            detect_range([])

    def test_only_trailing_window_matters(self, lnkd_window):
        older = _bars_from_closes([50.0 + 3 * i for i in range(15)], start=date(2012, 1, 1))
        assert detect_range(older + lnkd_window) == detect_range(lnkd_window)

    @pytest.mark.parametrize('c', [-12.5, -1.0, 0.37, 5.0, 12.5])
    def test_translation_covariance(self, lnkd_window, c):
        base = detect_range(lnkd_window)
        shifted = detect_range([bar.shifted(c) for bar in lnkd_window])
        assert isinstance(shifted, RangeBound)
        assert shifted.support == pytest.approx(base.support + c)
        assert shifted.resistance == pytest.approx(base.resistance + c)
        assert shifted.width == pytest.approx(base.width)

    def test_positive_width(self, lnkd_window):
        for end in range(20, len(lnkd_window) + 1):
            detected = detect_range(lnkd_window[:end])
            if isinstance(detected, RangeBound):
                assert detected.width > 0


class TestRangeWidth:

    @pytest.mark.parametrize('support, resistance, expected', [
        (66.95, 70.08, 3.13),
        (97.81, 101.17, 3.36),
        (41.0, 42.0, 1.0),
    ])
    def test_width(self, support, resistance, expected):
        assert range_width(RangeBound(support=support, resistance=resistance)) == pytest.approx(expected)
