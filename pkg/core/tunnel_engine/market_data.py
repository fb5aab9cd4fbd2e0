"""
market_data.py - OHLC / implied-vol ingestion and the evaluation journal

File formats (plain CSV, fixed headers, ISO-8601 dates):

    ohlc:  date,open,high,low,close
    vols:  date,iv

The journal is one JSON object per line; see docs/schemas.md. A journal has a
single writer at a time (advisory flock), any number of readers.
"""
import fcntl
import io
import json
import logging
import math
import os
import re
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import pandas as pd

from .exceptions import (CsvParseError, JournalError, JournalLockError,
                         ValidationError)
from .tunneling_core import (MarketParams, RangeBound, TunnelEvaluation,
                             barrier_product)

logger = logging.getLogger(__name__)

OHLC_COLUMNS = ['date', 'open', 'high', 'low', 'close']
VOL_COLUMNS = ['date', 'iv']

_ISO_DATE = re.compile(r'^\d{4}-\d{2}-\d{2}$')
_LINE_IN_MESSAGE = re.compile(r'\b(line|row) (\d+)')

PathLike = Union[str, Path]


@dataclass(frozen=True)
class OhlcBar:
    """One daily bar."""
    timestamp: date
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        values = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"non-finite price in bar {self.timestamp}")
        if self.low <= 0:
            raise ValueError(f"low must be > 0, got {self.low!r}")
        if self.low > min(self.open, self.close):
            raise ValueError(f"low {self.low!r} above open/close")
        if self.high < max(self.open, self.close):
            raise ValueError(f"high {self.high!r} below open/close")

    def shifted(self, offset: float) -> 'OhlcBar':
        return OhlcBar(self.timestamp, self.open + offset, self.high + offset,
                       self.low + offset, self.close + offset)

    def reflected(self, axis: float) -> 'OhlcBar':
        """Mirror prices about `axis`; highs and lows swap roles."""
        return OhlcBar(self.timestamp, 2 * axis - self.open, 2 * axis - self.low,
                       2 * axis - self.high, 2 * axis - self.close)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'date': self.timestamp.isoformat(),
            'open': self.open,
            'high': self.high,
            'low': self.low,
            'close': self.close,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'OhlcBar':
        return cls(
            timestamp=date.fromisoformat(data['date']),
            open=data['open'],
            high=data['high'],
            low=data['low'],
            close=data['close'],
        )


@dataclass(frozen=True)
class VolPoint:
    """Implied volatility mark for one date."""
    timestamp: date
    iv: float

    def __post_init__(self):
        if not math.isfinite(self.iv) or self.iv <= 0:
            raise ValueError(f"iv must be finite and > 0, got {self.iv!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {'date': self.timestamp.isoformat(), 'iv': self.iv}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'VolPoint':
        return cls(timestamp=date.fromisoformat(data['date']), iv=data['iv'])


@dataclass(frozen=True)
class EvaluationRecord:
    """
    One journal entry. `evaluation` is None when the range was past the
    turning point (NoBarrier).
    """
    timestamp: date
    symbol: str
    range_bound: RangeBound
    params: MarketParams
    evaluation: Optional[TunnelEvaluation]

    @property
    def is_no_barrier(self) -> bool:
        return self.evaluation is None

    @property
    def barrier_product(self) -> float:
        return barrier_product(self.params, self.range_bound.width)

    def to_dict(self) -> Dict[str, Any]:
        if self.evaluation is None:
            evaluation = {'regime': 'NoBarrier', 'barrier_product': self.barrier_product}
        else:
            evaluation = self.evaluation.to_dict()
        return {
            'timestamp': self.timestamp.isoformat(),
            'symbol': self.symbol,
            'range': self.range_bound.to_dict(),
            'params': self.params.to_dict(),
            'evaluation': evaluation,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EvaluationRecord':
        evaluation_data = data['evaluation']
        evaluation = None
        if evaluation_data.get('regime') != 'NoBarrier':
            evaluation = TunnelEvaluation.from_dict(evaluation_data)
        return cls(
            timestamp=date.fromisoformat(data['timestamp']),
            symbol=data['symbol'],
            range_bound=RangeBound.from_dict(data['range']),
            params=MarketParams.from_dict(data['params']),
            evaluation=evaluation,
        )


# ---------------------------------------------------------------------------
# CSV parsing
# ---------------------------------------------------------------------------

def _decode(data: Union[bytes, str], source: str) -> str:
    if isinstance(data, str):
        return data
    try:
        return data.decode('utf-8')
    except UnicodeDecodeError as e:
        line_start = data.rfind(b'\n', 0, e.start) + 1
        raise CsvParseError(
            f"invalid UTF-8 byte 0x{data[e.start]:02x}", source,
            line=data.count(b'\n', 0, e.start) + 1,
            column=e.start - line_start + 1,
        ) from e


def _error_line(message: str, text: str) -> int:
    """File line named by a pandas tokenizer error ('line N' is 1-based, 'row N' 0-based)."""
    match = _LINE_IN_MESSAGE.search(message)
    if match is None:
        return max(len(text.splitlines()), 1)
    number = int(match.group(2))
    return number if match.group(1) == 'line' else number + 1


def _read_frame(data: Union[bytes, str], columns: List[str], source: str) -> pd.DataFrame:
    """
    Read CSV text into a frame of raw strings, one row per line after the header.

    The header is read as an ordinary row so its field count binds every data
    row; a row with extra fields is a tokenizer error rather than a shifted index.
    """
    text = _decode(data, source)
    if not text.strip():
        raise CsvParseError(f"missing header (expected {','.join(columns)})", source, line=1)
    try:
        frame = pd.read_csv(
            io.StringIO(text),
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            skipinitialspace=True,
            index_col=False,
        )
    except Exception as e:
        raise CsvParseError(f"malformed CSV: {str(e).strip()}", source,
                            line=_error_line(str(e), text)) from e

    header = [c.strip() if isinstance(c, str) else '' for c in frame.iloc[0]]
    if header != columns:
        raise CsvParseError(
            f"expected header {','.join(columns)}, got {','.join(header)}", source, line=1
        )
    body = frame.iloc[1:].reset_index(drop=True)
    body.columns = columns
    return body


def _is_blank(values: Sequence[Any]) -> bool:
    return all(not isinstance(v, str) or not v.strip() for v in values)


def _field(value: Any, column: int, name: str, source: str, line: int) -> str:
    if not isinstance(value, str) or not value.strip():
        raise CsvParseError(f"missing value for '{name}'", source, line=line, column=column)
    return value.strip()


def _parse_date(value: Any, source: str, line: int) -> date:
    text = _field(value, 1, 'date', source, line)
    if not _ISO_DATE.match(text):
        raise CsvParseError(f"date must be YYYY-MM-DD, got {text!r}", source, line=line, column=1)
    try:
        return date.fromisoformat(text)
    except ValueError as e:
        raise CsvParseError(f"invalid date {text!r}: {e}", source, line=line, column=1) from e


def _parse_number(value: Any, column: int, name: str, source: str, line: int) -> float:
    text = _field(value, column, name, source, line)
    try:
        return float(text)
    except ValueError as e:
        raise CsvParseError(f"'{name}' is not a number: {text!r}", source, line=line, column=column) from e


def _check_order(items: List[Any], lines: List[int], source: str) -> List[Any]:
    """Sort ascending by timestamp; duplicate dates are rejected."""
    order = sorted(range(len(items)), key=lambda i: (items[i].timestamp, lines[i]))
    for previous, current in zip(order, order[1:]):
        if items[current].timestamp == items[previous].timestamp:
            raise ValidationError(
                f"duplicate date {items[current].timestamp.isoformat()} "
                f"(first seen on line {lines[previous]})",
                source, line=lines[current], row=items[current].to_dict(),
            )
    return [items[i] for i in order]


def parse_ohlc(data: Union[bytes, str], source: str = '<ohlc>') -> List[OhlcBar]:
    """
    Parse `date,open,high,low,close` CSV content.

    Returns:
        Bars sorted by date; a header-only file gives an empty list

    Raises:
        CsvParseError: unreadable content, wrong header, malformed values
        ValidationError: OHLC invariant violations and duplicate dates
    """
    frame = _read_frame(data, OHLC_COLUMNS, source)
    bars, lines = [], []
    for index, values in enumerate(frame.itertuples(index=False, name=None)):
        line = index + 2
        if _is_blank(values):
            continue
        timestamp = _parse_date(values[0], source, line)
        prices = [
            _parse_number(values[col], col + 1, OHLC_COLUMNS[col], source, line)
            for col in range(1, 5)
        ]
        try:
            bars.append(OhlcBar(timestamp, *prices))
        except ValueError as e:
            raise ValidationError(str(e), source, line=line, row=list(values)) from e
        lines.append(line)
    return _check_order(bars, lines, source)


def parse_vols(data: Union[bytes, str], source: str = '<vols>') -> List[VolPoint]:
    """Parse `date,iv` CSV content; same contract as parse_ohlc."""
    frame = _read_frame(data, VOL_COLUMNS, source)
    points, lines = [], []
    for index, values in enumerate(frame.itertuples(index=False, name=None)):
        line = index + 2
        if _is_blank(values):
            continue
        timestamp = _parse_date(values[0], source, line)
        iv = _parse_number(values[1], 2, 'iv', source, line)
        try:
            points.append(VolPoint(timestamp, iv))
        except ValueError as e:
            raise ValidationError(str(e), source, line=line, row=list(values)) from e
        lines.append(line)
    return _check_order(points, lines, source)


def load_ohlc(path: PathLike) -> List[OhlcBar]:
    path = Path(path)
    bars = parse_ohlc(path.read_bytes(), source=str(path))
    logger.debug(f"Loaded {len(bars)} bars from {path}")
    return bars


def load_vols(path: PathLike) -> List[VolPoint]:
    path = Path(path)
    points = parse_vols(path.read_bytes(), source=str(path))
    logger.debug(f"Loaded {len(points)} vol points from {path}")
    return points


def format_ohlc(bars: Iterable[OhlcBar]) -> str:
    frame = pd.DataFrame([bar.to_dict() for bar in bars], columns=OHLC_COLUMNS)
    return frame.to_csv(index=False, lineterminator='\n')


def format_vols(points: Iterable[VolPoint]) -> str:
    frame = pd.DataFrame([point.to_dict() for point in points], columns=VOL_COLUMNS)
    return frame.to_csv(index=False, lineterminator='\n')


def write_ohlc(bars: Iterable[OhlcBar], path: PathLike) -> None:
    Path(path).write_text(format_ohlc(bars), encoding='utf-8')


def write_vols(points: Iterable[VolPoint], path: PathLike) -> None:
    Path(path).write_text(format_vols(points), encoding='utf-8')


def align_vols(bars: Sequence[OhlcBar], points: Sequence[VolPoint]) -> List[Optional[float]]:
    """
    Implied vol in force on each bar date: the last mark dated on or before
    the bar (carry forward). None before the first mark.
    """
    aligned: List[Optional[float]] = []
    current: Optional[float] = None
    j = 0
    for bar in bars:
        while j < len(points) and points[j].timestamp <= bar.timestamp:
            current = points[j].iv
            j += 1
        aligned.append(current)
    return aligned


# ---------------------------------------------------------------------------
# Evaluation journal
# ---------------------------------------------------------------------------

class EvaluationJournal:
    """
    Append-only JSON-lines journal of EvaluationRecords.

    Usage:
        with EvaluationJournal(path) as journal:
            journal.append(record)
    """

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self._handle = None
        self.count = 0

    def open(self) -> 'EvaluationJournal':
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            handle = open(self.path, 'a+', encoding='utf-8')
        except OSError as e:
            raise JournalError(f"cannot open journal {self.path}: {e}") from e
        try:
            fcntl.flock(handle.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError as e:
            handle.close()
            raise JournalLockError(f"journal {self.path} already has a writer") from e
        handle.seek(0)
        self.count = sum(1 for line in handle if line.strip())
        self._handle = handle
        logger.info(f"Journal {self.path} opened for append ({self.count} existing records)")
        return self

    def close(self) -> None:
        if self._handle is not None:
            fcntl.flock(self._handle.fileno(), fcntl.LOCK_UN)
            self._handle.close()
            self._handle = None

    def __enter__(self) -> 'EvaluationJournal':
        return self.open()

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()

    def append(self, record: EvaluationRecord) -> int:
        """
        Durably append one record.

        Returns:
            1-based sequence number of the record in the journal
        """
        if self._handle is None:
            raise JournalError(f"journal {self.path} is not open")
        line = json.dumps(record.to_dict(), separators=(',', ':')) + '\n'
        try:
            self._handle.write(line)
            self._handle.flush()
            os.fsync(self._handle.fileno())
        except OSError as e:
            raise JournalError(f"write to {self.path} failed: {e}") from e
        self.count += 1
        return self.count


def read_journal(path: PathLike) -> List[EvaluationRecord]:
    """Read every record back in append order."""
    path = Path(path)
    records = []
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            for number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(EvaluationRecord.from_dict(json.loads(line)))
                except (ValueError, KeyError, TypeError) as e:
                    raise JournalError(f"{path}:{number}: unreadable journal record: {e}") from e
    except OSError as e:
        raise JournalError(f"cannot read journal {path}: {e}") from e
    return records
