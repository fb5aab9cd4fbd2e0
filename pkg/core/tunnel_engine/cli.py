"""
cli.py - Command line entry point

Usage:
    python run.py eval --r 0.03 --sigma 0.47 --k 3.9
    python run.py reference [--row GOOG] [--tolerance 1e-9]   (alias: table1)
    python run.py scan --data-dir fixtures/ [--config tunnel.cfg] [--jobs 4]
    python run.py backtest --ohlc LNKD.ohlc.csv --vols LNKD.vols.csv
    python run.py verify [--rel-tol 1e-9] [--random 50] [--seed 20130207]
    python run.py plot --kind t-vs-k --out out/lnkd

Exit codes: 0 success, 1 domain failure (NoBarrier, tolerance breach),
2 usage or configuration error, 3 input/output or parse error.
Results go to stdout; diagnostics go to stderr.
"""
import argparse
import json
import logging
import sys
import time
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from .config import TunnelSettings, load_settings, setup_logging
from .exceptions import (BacktestInputError, ConfigurationError, JournalError,
                         MarketDataError, NoBarrierError, QuadratureError)
from .market_data import EvaluationJournal, load_ohlc, load_vols
from .plotting import PlotKind, psi_profile, t_vs_k_sweep, t_vs_sigma_sweep, write_plot
from .reference_events import (REFERENCE_D_TOLERANCE, REFERENCE_EVENTS,
                               REFERENCE_T_TOLERANCE, get_event)
from .strategy import SUMMARY_COLUMNS, BacktestReport, backtest
from .tunneling_core import MarketParams, RangeBound, transmission_coefficient
from .verification_lab import DEFAULT_SEED, BarrierSpec, verify_oracle

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
EXIT_IO = 3

OHLC_SUFFIX = '.ohlc.csv'
VOLS_SUFFIX = '.vols.csv'


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _emit(line: str = '') -> None:
    sys.stdout.write(line + '\n')


def _warn(message: str) -> None:
    sys.stderr.write(message + '\n')


def _manual_range(args: argparse.Namespace) -> Optional[RangeBound]:
    if args.support is None and args.resistance is None:
        return None
    if args.support is None or args.resistance is None:
        raise ConfigurationError("--support and --resistance must be given together")
    return RangeBound(support=args.support, resistance=args.resistance)


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args: argparse.Namespace) -> int:
    params = MarketParams(r=args.r, sigma=args.sigma)
    manual = _manual_range(args)
    if (args.k is None) == (manual is None):
        raise ConfigurationError("give either --k or --support/--resistance")
    K = args.k if args.k is not None else manual.width

    evaluation = transmission_coefficient(params, K)
    if args.json:
        _emit(json.dumps(evaluation.to_dict()))
    else:
        for key, value in evaluation.to_dict().items():
            _emit(f"{key:<9} {_fmt(value)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# reference
# ---------------------------------------------------------------------------

def cmd_reference(args: argparse.Namespace) -> int:
    try:
        rows = [get_event(args.row)] if args.row else list(REFERENCE_EVENTS)
    except KeyError as e:
        raise ConfigurationError(e.args[0]) from e
    t_tol = args.tolerance if args.tolerance is not None else REFERENCE_T_TOLERANCE
    d_tol = args.tolerance if args.tolerance is not None else REFERENCE_D_TOLERANCE

    records, failures = [], []
    for row in rows:
        evaluation = transmission_coefficient(row.params, row.K)
        t_delta = abs(evaluation.T - row.T)
        d_delta = abs(evaluation.d - row.d)
        row_ok = t_delta <= t_tol and d_delta <= d_tol
        if t_delta > t_tol:
            failures.append(f"{row.symbol} T: computed {evaluation.T:.10g} printed {row.T} delta {t_delta:.3g}")
        if d_delta > d_tol:
            failures.append(f"{row.symbol} d: computed {evaluation.d:.10g} printed {row.d} delta {d_delta:.3g}")
        records.append({
            'symbol': row.symbol,
            'T': evaluation.T,
            'T_printed': row.T,
            'T_delta': t_delta,
            'd': evaluation.d,
            'd_printed': row.d,
            'd_delta': d_delta,
            'status': 'PASS' if row_ok else 'FAIL',
        })

    frame = pd.DataFrame(records)
    _emit(frame.to_string(index=False, float_format=lambda v: f"{v:.10g}"))
    for failure in failures:
        _warn(f"FAIL {failure}")
    return EXIT_OK if not failures else EXIT_DOMAIN


# ---------------------------------------------------------------------------
# scan / backtest
# ---------------------------------------------------------------------------

def _run_symbol(symbol: str, ohlc_path: str, vols_path: str, settings: Dict[str, Any],
                fixed_range: Optional[RangeBound]) -> Dict[str, Any]:
    """
    Backtest one symbol (worker function for multiprocessing).

    Kept at module level so Pool can pickle it. Failures come back as an
    'error' string so one bad symbol never stops the others.
    """
    try:
        tunnel_settings = TunnelSettings(**settings)
        bars = load_ohlc(ohlc_path)
        if not Path(vols_path).is_file():
            raise MarketDataError("vol file not found", source=vols_path)
        vols = load_vols(vols_path)
        report = backtest(
            bars, vols, tunnel_settings.risk_free_rate,
            range_cfg=tunnel_settings.range_config(),
            strat_cfg=tunnel_settings.strategy_config(),
            symbol=symbol,
            fixed_range=fixed_range,
        )
        return {'symbol': symbol, 'report': report, 'error': None}
    except (MarketDataError, BacktestInputError, OSError) as e:
        return {'symbol': symbol, 'report': None, 'error': str(e)}


def discover_symbols(data_dir: Path) -> List[str]:
    return sorted(p.name[:-len(OHLC_SUFFIX)] for p in data_dir.glob(f"*{OHLC_SUFFIX}"))


def _write_summary(reports: Sequence[BacktestReport], path: str) -> None:
    frames = [frame for frame in (report.summary_frame() for report in reports) if not frame.empty]
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=SUMMARY_COLUMNS)
    frame.to_csv(path, index=False, lineterminator='\n')


def cmd_scan(args: argparse.Namespace) -> int:
    data_dir = Path(args.data_dir)
    if not data_dir.is_dir():
        raise MarketDataError("data directory not found", source=str(data_dir))
    settings = load_settings(args.config, risk_free_rate=args.r)
    fixed_range = _manual_range(args)
    if args.jobs < 1:
        raise ConfigurationError(f"--jobs must be >= 1, got {args.jobs}")

    symbols = discover_symbols(data_dir)
    logger.info(f"Scanning {len(symbols)} symbols in {data_dir} with {args.jobs} worker(s)")
    start_time = time.time()

    worker_args = [
        (symbol, str(data_dir / f"{symbol}{OHLC_SUFFIX}"), str(data_dir / f"{symbol}{VOLS_SUFFIX}"),
         settings.to_dict(), fixed_range)
        for symbol in symbols
    ]
    if args.jobs > 1 and len(worker_args) > 1:
        with Pool(processes=min(args.jobs, len(worker_args))) as pool:
            results = pool.starmap(_run_symbol, worker_args)
    else:
        results = [_run_symbol(*worker) for worker in worker_args]
    results.sort(key=lambda result: result['symbol'])

    reports = [result['report'] for result in results if result['report'] is not None]
    for result in results:
        if result['error'] is not None:
            _warn(f"{result['symbol']}: {result['error']}")

    journal_path = Path(args.journal) if args.journal else data_dir / 'journal.jsonl'
    with EvaluationJournal(journal_path) as journal:
        for report in reports:
            for record in report.evaluations:
                journal.append(record)

    for report in reports:
        for outcome in report.outcomes:
            _emit(json.dumps({'type': 'signal', **outcome.to_dict()}))
    if args.summary:
        _write_summary(reports, args.summary)

    logger.info(f"Scan complete: {len(reports)}/{len(results)} symbols, "
                f"{sum(len(r.outcomes) for r in reports)} signals in {time.time() - start_time:.2f}s")
    if results and not reports:
        return EXIT_IO
    return EXIT_OK


def cmd_backtest(args: argparse.Namespace) -> int:
    settings = load_settings(args.config, risk_free_rate=args.r, side=args.side)
    symbol = args.symbol or Path(args.ohlc).name.split('.')[0]
    bars = load_ohlc(args.ohlc)
    vols = load_vols(args.vols)
    report = backtest(
        bars, vols, settings.risk_free_rate,
        range_cfg=settings.range_config(),
        strat_cfg=settings.strategy_config(),
        symbol=symbol,
        fixed_range=_manual_range(args),
    )
    sys.stdout.write(report.to_jsonl())
    if args.summary:
        _write_summary([report], args.summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify / plot
# ---------------------------------------------------------------------------

def cmd_verify(args: argparse.Namespace) -> int:
    if not args.rel_tol > 0:
        raise ConfigurationError(f"--rel-tol must be > 0, got {args.rel_tol}")
    if args.random < 0:
        raise ConfigurationError(f"--random must be >= 0, got {args.random}")
    report = verify_oracle(rel_tol=args.rel_tol, n_random=args.random, seed=args.seed)
    _emit(json.dumps(report.to_dict()))
    if not report.attainable:
        _warn(f"rel-tol {args.rel_tol:g} is below the quadrature accuracy floor")
    elif not report.passed:
        _warn(f"max relative deviation {report.max_rel_deviation:.3e} exceeds {args.rel_tol:g} "
              f"(worst: {report.worst.label})")
    return EXIT_OK if report.passed else EXIT_DOMAIN


def cmd_plot(args: argparse.Namespace) -> int:
    kind = PlotKind(args.kind)
    if kind is PlotKind.T_VS_K:
        frame = t_vs_k_sweep(MarketParams(r=args.r, sigma=args.sigma), points=args.points)
    elif kind is PlotKind.T_VS_SIGMA:
        frame = t_vs_sigma_sweep(args.r, args.k, sigma_max=args.sigma_max, points=args.points)
    else:
        frame = psi_profile(BarrierSpec.from_values(args.r, args.sigma, args.k), n_steps=args.n_steps)
    csv_path, svg_path = write_plot(frame, kind, args.out)
    _emit(json.dumps({'kind': kind.value, 'rows': len(frame), 'csv': str(csv_path), 'svg': str(svg_path)}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_manual_range(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--support', type=float, default=None, help='Manual support level')
    parser.add_argument('--resistance', type=float, default=None, help='Manual resistance level')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='tunnel',
        description='Transmission-coefficient timing for range-bound markets',
    )
    parser.add_argument('--log-level', default=None,
                        help='DEBUG, INFO, WARNING or ERROR (default: $LOG_LEVEL or WARNING)')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('eval', help='Evaluate lambda, u, T and d for one range')
    p.add_argument('--r', type=float, required=True, help='Risk-free rate (decimal, annualized)')
    p.add_argument('--sigma', type=float, required=True, help='Implied volatility (decimal, annualized)')
    p.add_argument('--k', type=float, default=None, help='Range width K in price units')
    _add_manual_range(p)
    p.add_argument('--json', action='store_true', help='Print a single JSON object')
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser('reference', aliases=['table1'], help='Recompute the reference events')
    p.add_argument('--tolerance', type=float, default=None,
                   help=f'Absolute tolerance for T and d (default: {REFERENCE_T_TOLERANCE} / {REFERENCE_D_TOLERANCE})')
    p.add_argument('--row', default=None, help='Check a single symbol (LNKD, GOOG, HUM, NFLX)')
    p.set_defaults(handler=cmd_reference)

    p = sub.add_parser('scan', help='Backtest every <SYMBOL>.ohlc.csv / .vols.csv pair in a directory')
    p.add_argument('--data-dir', required=True, help='Directory holding the CSV files')
    p.add_argument('--config', default=None, help='key = value settings file')
    p.add_argument('--journal', default=None, help='Evaluation journal (default: <data-dir>/journal.jsonl)')
    p.add_argument('--r', type=float, default=None, help='Risk-free rate override')
    p.add_argument('--jobs', type=int, default=1, help='Worker processes (default: 1)')
    p.add_argument('--summary', default=None, help='Write the per-signal summary CSV here')
    _add_manual_range(p)
    p.set_defaults(handler=cmd_scan)

    p = sub.add_parser('backtest', help='Backtest one symbol')
    p.add_argument('--ohlc', required=True, help='date,open,high,low,close CSV')
    p.add_argument('--vols', required=True, help='date,iv CSV')
    p.add_argument('--symbol', default=None, help='Symbol label (default: from the file name)')
    p.add_argument('--config', default=None, help='key = value settings file')
    p.add_argument('--r', type=float, default=None, help='Risk-free rate override')
    p.add_argument('--side', choices=['call', 'put'], default=None, help='Trade side')
    p.add_argument('--summary', default=None, help='Write the per-signal summary CSV here')
    _add_manual_range(p)
    p.set_defaults(handler=cmd_backtest)

    p = sub.add_parser('verify', help='Check the closed form against quadrature')
    p.add_argument('--rel-tol', type=float, default=1e-9, help='Relative tolerance (default: 1e-9)')
    p.add_argument('--random', type=int, default=50, help='Random specs to add (default: 50)')
    p.add_argument('--seed', type=int, default=DEFAULT_SEED, help=f'RNG seed (default: {DEFAULT_SEED})')
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser('plot', help='Write sweep CSV and SVG')
    p.add_argument('--kind', required=True, choices=[kind.value for kind in PlotKind])
    p.add_argument('--out', required=True, help='Output path prefix; writes <out>.csv and <out>.svg')
    p.add_argument('--r', type=float, default=0.03)
    p.add_argument('--sigma', type=float, default=0.47)
    p.add_argument('--k', type=float, default=3.9)
    p.add_argument('--points', type=int, default=100)
    p.add_argument('--sigma-max', type=float, default=100.0)
    p.add_argument('--n-steps', type=int, default=10000)
    p.set_defaults(handler=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        setup_logging(args.log_level)
    except ConfigurationError as e:
        _warn(f"error: {e}")
        return EXIT_USAGE

    try:
        return args.handler(args)
    except (NoBarrierError, QuadratureError) as e:
        _warn(f"error: {e}")
        return EXIT_DOMAIN
    except (MarketDataError, JournalError, BacktestInputError, OSError) as e:
        _warn(f"error: {e}")
        return EXIT_IO
    except (ConfigurationError, ValueError) as e:
        _warn(f"error: {e}")
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
