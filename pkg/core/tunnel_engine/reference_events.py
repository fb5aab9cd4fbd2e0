"""
reference_events.py - Reference tunneling events and synthetic replay fixtures

The four reference events (LNKD, GOOG, HUM, NFLX) with their printed inputs
and outputs. Prices are the chart-read support/resistance levels; T and d are
printed rounded, so comparisons use REFERENCE_T_TOLERANCE / REFERENCE_D_TOLERANCE.

Replay fixtures rebuild each event as daily bars: a range oscillating between
the printed levels that ends on the first event date, a breakout bar on the
second event date clearing resistance + d, and an implied-vol path stepping
from the pre-drop mark to sigma (signal day) and on to the post-drop mark.
"""
import logging
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import pandas as pd

from .market_data import OhlcBar, VolPoint, write_ohlc, write_vols
from .tunneling_core import MarketParams, RangeBound, penetration_distance

logger = logging.getLogger(__name__)

REFERENCE_T_TOLERANCE = 1e-3
REFERENCE_D_TOLERANCE = 1e-4

# Relative vol drop that makes the LNKD (0.63 -> 0.47) and HUM (0.43 -> 0.31)
# signal-day marks count as a fall; the strategy default stays at 0.30.
REPLAY_VOL_DROP_RATIO = 0.25

# Bars before the signal day in a replay fixture; covers the default 20-bar window.
FIXTURE_RANGE_BARS = 24
FIXTURE_TRAILING_BARS = 2
REPLAY_CONFIG_NAME = 'replay.cfg'

# One oscillation as (open, high, low, close) fractions of K above support:
# a resistance touch, a fall, a support touch, a recovery.
_CYCLE = (
    (0.70, 1.00, 0.60, 0.90),
    (0.85, 0.92, 0.35, 0.40),
    (0.30, 0.40, 0.00, 0.10),
    (0.15, 0.65, 0.10, 0.60),
)


@dataclass(frozen=True)
class ReferenceEvent:
    symbol: str
    company: str
    signal_date: date
    breakout_date: date
    r: float
    sigma: float
    resistance: float
    support: float
    K: float
    d: float
    T: float
    vol_from: float
    vol_to: float

    @property
    def params(self) -> MarketParams:
        return MarketParams(r=self.r, sigma=self.sigma)

    @property
    def range_bound(self) -> RangeBound:
        return RangeBound(support=self.support, resistance=self.resistance)

    def to_dict(self) -> Dict[str, object]:
        return {
            'symbol': self.symbol,
            'company': self.company,
            'dates': f"{self.signal_date.isoformat()}/{self.breakout_date.isoformat()}",
            'r': self.r,
            'sigma': self.sigma,
            'resistance': self.resistance,
            'support': self.support,
            'K': self.K,
            'd': self.d,
            'T': self.T,
            'vol_from': self.vol_from,
            'vol_to': self.vol_to,
        }


# Event spans as printed (signal day, breakout day); r is the 3% Treasury rate
# used throughout.
REFERENCE_EVENTS: Tuple[ReferenceEvent, ...] = (
    ReferenceEvent('LNKD', 'LinkedIn', date(2013, 2, 7), date(2013, 2, 8),
                   r=0.03, sigma=0.47, resistance=127.2, support=123.3, K=3.9,
                   d=0.058114, T=0.998675, vol_from=0.63, vol_to=0.39),
    ReferenceEvent('GOOG', 'Google', date(2013, 1, 22), date(2013, 1, 23),
                   r=0.03, sigma=0.15, resistance=704.7, support=702.6, K=2.1,
                   d=0.136068, T=0.95, vol_from=0.40, vol_to=0.15),
    ReferenceEvent('HUM', 'Humana', date(2013, 3, 28), date(2013, 4, 2),
                   r=0.03, sigma=0.31, resistance=70.08, support=66.95, K=3.13,
                   d=0.08455, T=0.9948, vol_from=0.43, vol_to=0.25),
    ReferenceEvent('NFLX', 'Netflix', date(2013, 1, 23), date(2013, 1, 24),
                   r=0.03, sigma=0.55, resistance=101.17, support=97.81, K=3.36,
                   d=0.921744, T=0.933, vol_from=0.95, vol_to=0.55),
)


def get_event(symbol: str) -> ReferenceEvent:
    for row in REFERENCE_EVENTS:
        if row.symbol == symbol.upper():
            return row
    known = ', '.join(row.symbol for row in REFERENCE_EVENTS)
    raise KeyError(f"unknown reference symbol {symbol!r} (known: {known})")


def range_bars(support: float, resistance: float, end: date, count: int) -> List[OhlcBar]:
    """
    `count` business-day bars ending on `end`, oscillating between the levels
    with highs touching resistance and lows touching support once per cycle.
    """
    def level(fraction: float) -> float:
        if fraction == 1.0:
            return resistance
        if fraction == 0.0:
            return support
        return support + fraction * (resistance - support)

    dates = pd.bdate_range(end=end, periods=count)
    bars = []
    for i, day in enumerate(dates):
        # Phase chosen so the last bar is a recovery bar closing mid-range
        fractions = _CYCLE[(i - count) % len(_CYCLE)]
        o, h, l, c = (level(f) for f in fractions)
        bars.append(OhlcBar(day.date(), o, h, l, c))
    return bars


def breakout_bars(row: ReferenceEvent, trailing: int = FIXTURE_TRAILING_BARS) -> List[OhlcBar]:
    """The breakout bar on the event's second date plus `trailing` follow-through bars."""
    d = penetration_distance(row.params, row.K)
    level = row.resistance
    close = level + d + 0.3 * row.K
    bars = [OhlcBar(row.breakout_date, open=level + 0.05 * row.K, high=level + d + 0.5 * row.K,
                    low=level - 0.02 * row.K, close=close)]
    for day in pd.bdate_range(start=row.breakout_date, periods=trailing + 1)[1:]:
        previous = close
        close = previous + 0.2 * row.K
        bars.append(OhlcBar(day.date(), open=previous, high=close + 0.3 * row.K,
                            low=previous - 0.2 * row.K, close=close))
    return bars


def fixture_bars(row: ReferenceEvent, range_count: int = FIXTURE_RANGE_BARS) -> List[OhlcBar]:
    return range_bars(row.support, row.resistance, row.signal_date, range_count) + breakout_bars(row)


def fixture_vols(row: ReferenceEvent, bars: Optional[List[OhlcBar]] = None) -> List[VolPoint]:
    """One mark per bar: vol_from during the range, sigma on the signal day, vol_to after."""
    bars = bars if bars is not None else fixture_bars(row)
    points = []
    for bar in bars:
        if bar.timestamp < row.signal_date:
            iv = row.vol_from
        elif bar.timestamp == row.signal_date:
            iv = row.sigma
        else:
            iv = row.vol_to
        points.append(VolPoint(bar.timestamp, iv))
    return points


def replay_fixture(row: ReferenceEvent) -> Tuple[List[OhlcBar], List[VolPoint]]:
    bars = fixture_bars(row)
    return bars, fixture_vols(row, bars)


def write_fixture_dir(path: Union[str, Path], rows: Tuple[ReferenceEvent, ...] = REFERENCE_EVENTS) -> List[Path]:
    """
    Write `<SYMBOL>.ohlc.csv` and `<SYMBOL>.vols.csv` for each row, plus a
    `replay.cfg` settings file carrying REPLAY_VOL_DROP_RATIO.

    Returns:
        Paths written, in row order
    """
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for row in rows:
        bars, vols = replay_fixture(row)
        ohlc_path = directory / f"{row.symbol}.ohlc.csv"
        vols_path = directory / f"{row.symbol}.vols.csv"
        write_ohlc(bars, ohlc_path)
        write_vols(vols, vols_path)
        written.extend([ohlc_path, vols_path])
        logger.debug(f"Wrote {row.symbol} fixture ({len(bars)} bars) to {directory}")
    config_path = directory / REPLAY_CONFIG_NAME
    config_path.write_text(f"vol_drop_ratio = {REPLAY_VOL_DROP_RATIO}\n", encoding='utf-8')
    written.append(config_path)
    return written
