"""
strategy.py - Tunneling trade timing and the historical backtest walk

The procedure, per bar:
    1. detect the range (support, resistance, K)
    2. take r and the implied vol in force
    3. recompute T whenever the vol or the range changes
    4. on T >= threshold after a vol fall, buy at the barrier level
       (resistance for calls, support for puts)
    5. target the penetration distance d beyond that level

Backtest outcomes measure only whether price reached the target; option
premiums are not modeled.
"""
import json
import logging
import math
import time
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from .exceptions import BacktestInputError, NoBarrierError
from .market_data import EvaluationRecord, OhlcBar, VolPoint, align_vols
from .range_detect import NoRange, RangeConfig, detect_range
from .tunneling_core import (MarketParams, RangeBound, Regime,
                             TunnelEvaluation, transmission_coefficient)

logger = logging.getLogger(__name__)

# Prices closer than this (relative) to a tick multiple count as on the tick
_TICK_EPSILON = 1e-9


class Side(Enum):
    CALL = "Call"
    PUT = "Put"

    @classmethod
    def parse(cls, value: Any) -> 'Side':
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        for side in cls:
            if side.value.lower() == text:
                return side
        raise ValueError(f"side must be 'call' or 'put', got {value!r}")


class Outcome(Enum):
    HIT = "Hit"
    EXPIRED = "Expired"
    OPEN = "Open"


@dataclass(frozen=True)
class StrategyConfig:
    """
    Trigger settings. vol_drop_ratio = 0 turns the fall requirement off so
    only the T threshold gates signals.
    """
    t_threshold: float = 0.95
    vol_drop_ratio: float = 0.30
    vol_lookback: int = 5
    side: Side = Side.CALL
    tick: float = 0.01
    outcome_horizon: int = 10

    def __post_init__(self):
        if not (0 < self.t_threshold < 1):
            raise ValueError(f"t_threshold must lie in (0, 1), got {self.t_threshold!r}")
        if not (0 <= self.vol_drop_ratio < 1):
            raise ValueError(f"vol_drop_ratio must lie in [0, 1), got {self.vol_drop_ratio!r}")
        if isinstance(self.vol_lookback, bool) or not isinstance(self.vol_lookback, int) or self.vol_lookback < 2:
            raise ValueError(f"vol_lookback must be an integer >= 2, got {self.vol_lookback!r}")
        if not (math.isfinite(self.tick) and self.tick > 0):
            raise ValueError(f"tick must be > 0, got {self.tick!r}")
        if isinstance(self.outcome_horizon, bool) or not isinstance(self.outcome_horizon, int) \
                or self.outcome_horizon < 1:
            raise ValueError(f"outcome_horizon must be an integer >= 1, got {self.outcome_horizon!r}")
        if not isinstance(self.side, Side):
            raise ValueError(f"side must be a Side, got {self.side!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            't_threshold': self.t_threshold,
            'vol_drop_ratio': self.vol_drop_ratio,
            'vol_lookback': self.vol_lookback,
            'side': self.side.value,
            'tick': self.tick,
            'outcome_horizon': self.outcome_horizon,
        }


@dataclass(frozen=True)
class VolFall:
    timestamp: date
    vol_from: float
    vol_to: float

    @property
    def drop_ratio(self) -> float:
        return (self.vol_from - self.vol_to) / self.vol_from


@dataclass(frozen=True)
class SignalRecord:
    timestamp: date
    symbol: str
    side: Side
    strike: float
    entry_ref: float
    exit_target: float
    evaluation: TunnelEvaluation
    vol_from: float
    vol_to: float
    range_bound: RangeBound

    @property
    def barrier_level(self) -> float:
        return self.range_bound.resistance if self.side is Side.CALL else self.range_bound.support

    def to_dict(self) -> Dict[str, Any]:
        return {
            'timestamp': self.timestamp.isoformat(),
            'symbol': self.symbol,
            'side': self.side.value,
            'strike': self.strike,
            'entry_ref': self.entry_ref,
            'exit_target': self.exit_target,
            'vol_from': self.vol_from,
            'vol_to': self.vol_to,
            'range': self.range_bound.to_dict(),
            'evaluation': self.evaluation.to_dict(),
        }


@dataclass(frozen=True)
class SignalOutcome:
    signal: SignalRecord
    outcome: Outcome
    bars_to_hit: Optional[int]
    pnl: float

    def to_dict(self) -> Dict[str, Any]:
        data = self.signal.to_dict()
        data.update({'outcome': self.outcome.value, 'bars_to_hit': self.bars_to_hit, 'pnl': self.pnl})
        return data


SUMMARY_COLUMNS = [
    'symbol', 'timestamp', 'side', 'strike', 'entry_ref', 'exit_target',
    'T', 'd', 'vol_from', 'vol_to', 'outcome', 'bars_to_hit', 'pnl',
]


@dataclass(frozen=True)
class BacktestReport:
    symbol: str
    outcomes: Tuple[SignalOutcome, ...]
    evaluations: Tuple[EvaluationRecord, ...] = field(repr=False)

    @property
    def signals(self) -> List[SignalRecord]:
        return [o.signal for o in self.outcomes]

    def count(self, outcome: Outcome) -> int:
        return sum(1 for o in self.outcomes if o.outcome is outcome)

    @property
    def total_pnl(self) -> float:
        return math.fsum(o.pnl for o in self.outcomes)

    def summary(self) -> Dict[str, Any]:
        return {
            'symbol': self.symbol,
            'evaluations': len(self.evaluations),
            'signals': len(self.outcomes),
            'hits': self.count(Outcome.HIT),
            'expired': self.count(Outcome.EXPIRED),
            'open': self.count(Outcome.OPEN),
            'total_pnl': self.total_pnl,
        }

    def to_jsonl(self) -> str:
        """One `signal` line per signal followed by a `summary` line."""
        lines = [json.dumps({'type': 'signal', **o.to_dict()}) for o in self.outcomes]
        lines.append(json.dumps({'type': 'summary', **self.summary()}))
        return '\n'.join(lines) + '\n'

    def summary_frame(self) -> pd.DataFrame:
        rows = []
        for o in self.outcomes:
            s = o.signal
            rows.append({
                'symbol': s.symbol,
                'timestamp': s.timestamp.isoformat(),
                'side': s.side.value,
                'strike': s.strike,
                'entry_ref': s.entry_ref,
                'exit_target': s.exit_target,
                'T': s.evaluation.T,
                'd': s.evaluation.d,
                'vol_from': s.vol_from,
                'vol_to': s.vol_to,
                'outcome': o.outcome.value,
                'bars_to_hit': o.bars_to_hit,
                'pnl': o.pnl,
            })
        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def evaluate_range(timestamp: date, symbol: str, range_bound: RangeBound,
                   params: MarketParams) -> EvaluationRecord:
    """Evaluate one (range, r, iv); NoBarrier becomes a record with no evaluation."""
    try:
        evaluation = transmission_coefficient(params, range_bound.width)
    except NoBarrierError as e:
        logger.debug(f"{symbol} {timestamp}: {e}")
        evaluation = None
    return EvaluationRecord(timestamp, symbol, range_bound, params, evaluation)


def evaluate_on_vol_change(range_bound: RangeBound, r: float, vol_series: Sequence[VolPoint],
                           symbol: str = '') -> List[EvaluationRecord]:
    """
    One record for the first vol point and for every point whose iv differs
    from the point before it.
    """
    if not vol_series:
        raise BacktestInputError("vol series is empty")
    records = []
    previous = None
    for point in vol_series:
        if previous is None or point.iv != previous:
            records.append(evaluate_range(point.timestamp, symbol, range_bound,
                                          MarketParams(r=r, sigma=point.iv)))
        previous = point.iv
    return records


def detect_vol_fall(vol_series: Sequence[VolPoint], cfg: StrategyConfig) -> Optional[VolFall]:
    """
    Compare the latest iv with the highest iv over the last `vol_lookback`
    points (fewer when the series is shorter, at least two). With
    vol_drop_ratio = 0 any non-empty history qualifies, a single mark included.
    """
    recent = vol_series[-cfg.vol_lookback:]
    if not recent:
        return None
    if len(recent) < 2 and cfg.vol_drop_ratio > 0:
        return None
    peak = max(point.iv for point in recent)
    current = recent[-1]
    if (peak - current.iv) / peak >= cfg.vol_drop_ratio:
        return VolFall(timestamp=current.timestamp, vol_from=peak, vol_to=current.iv)
    return None


def snap_strike(level: float, tick: float, side: Side) -> float:
    """Nearest tick at or inside the barrier: floor for calls, ceiling for puts."""
    steps = level / tick
    nearest = round(steps)
    if abs(steps - nearest) <= _TICK_EPSILON * max(1.0, abs(steps)):
        return level
    steps = math.floor(steps) if side is Side.CALL else math.ceil(steps)
    return steps * tick


def generate_signal(range_bound: RangeBound, evaluation: Optional[TunnelEvaluation],
                    fall: Optional[VolFall], cfg: StrategyConfig, close: float,
                    tick: Optional[float] = None, timestamp: Optional[date] = None,
                    symbol: str = '') -> Optional[SignalRecord]:
    """
    Emit a signal when T clears the threshold and a vol fall is present.

    Returns:
        SignalRecord with the strike at the barrier and exit_target = level +/- d,
        or None
    """
    if evaluation is None or evaluation.regime is Regime.NO_BARRIER:
        return None
    if evaluation.T < cfg.t_threshold or fall is None:
        return None
    tick = cfg.tick if tick is None else tick
    if cfg.side is Side.CALL:
        level = range_bound.resistance
        exit_target = level + evaluation.d
    else:
        level = range_bound.support
        exit_target = level - evaluation.d
    return SignalRecord(
        timestamp=timestamp if timestamp is not None else fall.timestamp,
        symbol=symbol,
        side=cfg.side,
        strike=snap_strike(level, tick, cfg.side),
        entry_ref=close,
        exit_target=exit_target,
        evaluation=evaluation,
        vol_from=fall.vol_from,
        vol_to=fall.vol_to,
        range_bound=range_bound,
    )


def resolve_outcome(signal: SignalRecord, later_bars: Sequence[OhlcBar], horizon: int) -> SignalOutcome:
    """Hit if a bar within `horizon` reaches the target, Expired after the horizon, else Open."""
    for offset, bar in enumerate(later_bars[:horizon], start=1):
        reached = bar.high >= signal.exit_target if signal.side is Side.CALL \
            else bar.low <= signal.exit_target
        if reached:
            pnl = signal.exit_target - signal.strike if signal.side is Side.CALL \
                else signal.strike - signal.exit_target
            return SignalOutcome(signal, Outcome.HIT, offset, pnl)
    if len(later_bars) >= horizon:
        return SignalOutcome(signal, Outcome.EXPIRED, None, 0.0)
    return SignalOutcome(signal, Outcome.OPEN, None, 0.0)


def backtest(bars: Sequence[OhlcBar], vols: Sequence[VolPoint], r: float,
             range_cfg: RangeConfig = RangeConfig(), strat_cfg: StrategyConfig = StrategyConfig(),
             symbol: str = '', fixed_range: Optional[RangeBound] = None) -> BacktestReport:
    """
    Walk the bars in order, evaluating and signalling as the procedure above.

    Args:
        bars: ascending daily bars
        vols: ascending implied-vol marks, carried forward onto bar dates
        r: risk-free rate for the whole run
        range_cfg: range detection settings
        strat_cfg: trigger settings
        symbol: label copied into records
        fixed_range: manual support/resistance used instead of detection

    Returns:
        BacktestReport with every evaluation and every signal outcome

    Raises:
        BacktestInputError: empty inputs, or vols starting after the last bar
    """
    if not bars:
        raise BacktestInputError(f"{symbol or 'backtest'}: no price bars")
    if not vols:
        raise BacktestInputError(f"{symbol or 'backtest'}: no implied vol points")
    if vols[0].timestamp > bars[-1].timestamp:
        raise BacktestInputError(
            f"{symbol or 'backtest'}: vols start {vols[0].timestamp} after the last bar {bars[-1].timestamp}"
        )
    start_time = time.time()
    aligned = align_vols(bars, vols)

    history: List[VolPoint] = []
    evaluations: List[EvaluationRecord] = []
    outcomes: List[SignalOutcome] = []
    last_iv: Optional[float] = None
    last_range: Optional[RangeBound] = None

    for i, bar in enumerate(bars):
        iv = aligned[i]
        if iv is None:
            continue
        history.append(VolPoint(bar.timestamp, iv))
        if fixed_range is not None:
            detected = fixed_range
        elif i + 1 < range_cfg.window:
            continue
        else:
            detected = detect_range(bars[i + 1 - range_cfg.window:i + 1], range_cfg)
        if isinstance(detected, NoRange):
            continue
        if iv == last_iv and detected == last_range:
            continue
        last_iv, last_range = iv, detected

        record = evaluate_range(bar.timestamp, symbol, detected, MarketParams(r=r, sigma=iv))
        evaluations.append(record)
        if record.evaluation is None:
            continue

        fall = detect_vol_fall(history, strat_cfg)
        signal = generate_signal(detected, record.evaluation, fall, strat_cfg, bar.close,
                                 timestamp=bar.timestamp, symbol=symbol)
        if signal is not None:
            outcome = resolve_outcome(signal, bars[i + 1:], strat_cfg.outcome_horizon)
            logger.info(f"{symbol} {bar.timestamp}: {signal.side.value} signal T={record.evaluation.T:.6f} "
                        f"strike={signal.strike} exit={signal.exit_target:.6f} -> {outcome.outcome.value}")
            outcomes.append(outcome)

    report = BacktestReport(symbol=symbol, outcomes=tuple(outcomes), evaluations=tuple(evaluations))
    logger.info(f"Backtest {symbol or '<unnamed>'}: {len(bars)} bars, {len(evaluations)} evaluations, "
                f"{len(outcomes)} signals in {time.time() - start_time:.3f}s")
    return report
