"""
Tunnel engine: transmission-coefficient timing for range-bound markets.

Closed-form evaluation, numerical verification, market data ingestion,
range detection, the signal/backtest procedure and the command line.
"""
from .exceptions import (BacktestInputError, ConfigurationError, JournalError,
                         MarketDataError, NoBarrierError, TunnelEngineError)
from .tunneling_core import (MarketParams, RangeBound, Regime, TunnelEvaluation,
                             classify_regime, penetration_distance,
                             transmission_coefficient)

__all__ = [
    'BacktestInputError',
    'ConfigurationError',
    'JournalError',
    'MarketDataError',
    'MarketParams',
    'NoBarrierError',
    'RangeBound',
    'Regime',
    'TunnelEngineError',
    'TunnelEvaluation',
    'classify_regime',
    'penetration_distance',
    'transmission_coefficient',
]
