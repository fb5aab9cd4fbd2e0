"""
range_detect.py - Support/resistance detection over trailing OHLC windows

A window is range-bound when its extremes are each touched repeatedly and the
closes do not drift across the band:

    resistance = max(high), support = min(low) over the trailing window
    touches    = bars with high within tolerance*resistance of resistance
                 (and lows likewise near support), at least touch_count each
    trending   = |least-squares drift of closes| > half the high-low span
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .exceptions import BacktestInputError
from .market_data import OhlcBar
from .tunneling_core import RangeBound

logger = logging.getLogger(__name__)


class NoRangeReason(Enum):
    TRENDING = "Trending"
    INSUFFICIENT_TOUCHES = "InsufficientTouches"
    # Also covers the degenerate window where resistance == support
    BREACHED_WINDOW = "BreachedWindow"


@dataclass(frozen=True)
class NoRange:
    reason: NoRangeReason
    detail: str = ''

    def to_dict(self):
        return {'reason': self.reason.value, 'detail': self.detail}


@dataclass(frozen=True)
class RangeConfig:
    """Trailing-window detection parameters."""
    window: int = 20
    touch_count: int = 2
    tolerance: float = 0.005

    def __post_init__(self):
        if isinstance(self.touch_count, bool) or not isinstance(self.touch_count, int) or self.touch_count < 2:
            raise ValueError(f"touch_count must be an integer >= 2, got {self.touch_count!r}")
        if isinstance(self.window, bool) or not isinstance(self.window, int):
            raise ValueError(f"window must be an integer, got {self.window!r}")
        if self.window < 2 * self.touch_count:
            raise ValueError(
                f"window ({self.window}) must be at least 2 * touch_count ({2 * self.touch_count})"
            )
        if not (math.isfinite(self.tolerance) and 0 < self.tolerance < 0.05):
            raise ValueError(f"tolerance must lie in (0, 0.05), got {self.tolerance!r}")

    def to_dict(self):
        return {'window': self.window, 'touch_count': self.touch_count, 'tolerance': self.tolerance}


DetectionResult = Union[RangeBound, NoRange]


def detect_range(bars: Sequence[OhlcBar], cfg: RangeConfig = RangeConfig()) -> DetectionResult:
    """
    Detect a flat range over the trailing `cfg.window` bars.

    Args:
        bars: ascending series; only the last cfg.window bars are read
        cfg: detection parameters

    Returns:
        RangeBound when the window is range-bound, otherwise NoRange with a reason

    Raises:
        BacktestInputError: fewer than cfg.window bars
    """
    if len(bars) < cfg.window:
        raise BacktestInputError(
            f"range detection needs {cfg.window} bars, got {len(bars)}"
        )
    window = bars[len(bars) - cfg.window:]
    highs = np.array([bar.high for bar in window])
    lows = np.array([bar.low for bar in window])
    closes = np.array([bar.close for bar in window])

    resistance = float(highs.max())
    support = float(lows.min())
    if resistance <= support:
        return NoRange(NoRangeReason.BREACHED_WINDOW, 'degenerate window: resistance == support')
    if closes.max() > resistance or closes.min() < support:
        return NoRange(NoRangeReason.BREACHED_WINDOW, 'close outside the window extremes')

    span = resistance - support
    slope = np.polyfit(np.arange(cfg.window, dtype=float), closes, 1)[0]
    drift = float(slope) * (cfg.window - 1)
    if abs(drift) > 0.5 * span:
        return NoRange(NoRangeReason.TRENDING, f"close drift {drift:.6g} over span {span:.6g}")

    top_touches = int(np.count_nonzero(highs >= resistance - cfg.tolerance * resistance))
    bottom_touches = int(np.count_nonzero(lows <= support + cfg.tolerance * support))
    if top_touches < cfg.touch_count or bottom_touches < cfg.touch_count:
        return NoRange(
            NoRangeReason.INSUFFICIENT_TOUCHES,
            f"{top_touches} resistance / {bottom_touches} support touches, need {cfg.touch_count}",
        )

    logger.debug(f"Range {support}-{resistance} ending {window[-1].timestamp}")
    return RangeBound(support=support, resistance=resistance)


def range_width(range_bound: RangeBound) -> float:
    """K = resistance - support."""
    return range_bound.width
