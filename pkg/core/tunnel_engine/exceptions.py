"""
exceptions.py - Error types raised by the tunnel engine

Every error raised on purpose by the engine derives from TunnelEngineError so
callers (the CLI in particular) can map failures onto exit codes.
"""
from typing import Any, Optional


class TunnelEngineError(Exception):
    """Base class for all tunnel engine errors."""


class NoBarrierError(TunnelEngineError, ValueError):
    """Raised when (r/sigma)*K^2 > 1, i.e. K >= sqrt(sigma/r)."""

    def __init__(self, r: float, sigma: float, K: float, barrier_product: float):
        self.r = r
        self.sigma = sigma
        self.K = K
        self.barrier_product = barrier_product
        super().__init__(
            f"not in tunneling regime: K >= sqrt(sigma/r) "
            f"(r={r!r}, sigma={sigma!r}, K={K!r}, (r/sigma)K^2={barrier_product:.12g})"
        )


class BarrierRangeError(TunnelEngineError, ValueError):
    """Raised when the decay rate is requested outside [K, s_star]."""


class QuadratureError(TunnelEngineError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float, abserr: float):
        self.estimate = estimate
        self.abserr = abserr
        super().__init__(f"{message} (estimate={estimate!r}, abserr={abserr!r})")


class ConfigurationError(TunnelEngineError, ValueError):
    """Invalid solver, strategy, range or file configuration."""


class MarketDataError(TunnelEngineError):
    """Base class for input file problems."""

    def __init__(self, message: str, source: str = "<input>",
                 line: Optional[int] = None, column: Optional[int] = None):
        self.source = source
        self.line = line
        self.column = column
        self.message = message
        where = source
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}")


class CsvParseError(MarketDataError):
    """The file could not be read as the expected CSV format."""


class ValidationError(MarketDataError):
    """A row parsed but violates a domain invariant."""

    def __init__(self, message: str, source: str = "<input>",
                 line: Optional[int] = None, row: Any = None):
        self.row = row
        super().__init__(message, source=source, line=line)


class JournalError(TunnelEngineError):
    """Evaluation journal I/O failure."""


class JournalLockError(JournalError):
    """Another writer already holds the journal."""


class BacktestInputError(TunnelEngineError, ValueError):
    """Empty, too short or misaligned inputs."""
