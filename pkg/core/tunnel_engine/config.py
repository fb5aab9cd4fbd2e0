"""
config.py - Run settings, config files and logging setup

Settings resolve in order, later winning:
    defaults -> TUNNEL_* environment (a local .env is honoured) -> config file -> CLI flags

A config file holds `key = value` lines, e.g.

    risk_free_rate = 0.03
    t_threshold = 0.95
    range_window = 20
"""
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import dotenv_values, load_dotenv

from .exceptions import ConfigurationError
from .range_detect import RangeConfig
from .strategy import Side, StrategyConfig

ENV_PREFIX = 'TUNNEL_'
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


@dataclass(frozen=True)
class TunnelSettings:
    risk_free_rate: float = 0.03
    t_threshold: float = 0.95
    vol_drop_ratio: float = 0.30
    vol_lookback: int = 5
    range_window: int = 20
    range_touch_count: int = 2
    range_tolerance: float = 0.005
    outcome_horizon: int = 10
    tick: float = 0.01
    side: str = 'call'

    def range_config(self) -> RangeConfig:
        return RangeConfig(
            window=self.range_window,
            touch_count=self.range_touch_count,
            tolerance=self.range_tolerance,
        )

    def strategy_config(self) -> StrategyConfig:
        return StrategyConfig(
            t_threshold=self.t_threshold,
            vol_drop_ratio=self.vol_drop_ratio,
            vol_lookback=self.vol_lookback,
            side=Side.parse(self.side),
            tick=self.tick,
            outcome_horizon=self.outcome_horizon,
        )

    def validate(self) -> 'TunnelSettings':
        """Build the derived configs once so bad values fail early as ConfigurationError."""
        if not self.risk_free_rate > 0:
            raise ConfigurationError(f"risk_free_rate must be > 0, got {self.risk_free_rate!r}")
        try:
            self.range_config()
            self.strategy_config()
        except ValueError as e:
            raise ConfigurationError(str(e)) from e
        return self

    def with_overrides(self, **overrides: Any) -> 'TunnelSettings':
        """Apply non-None overrides (CLI flags) on top of these settings."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(changes) - setting_names()
        if unknown:
            raise ConfigurationError(f"unknown settings: {', '.join(sorted(unknown))}")
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def setting_names() -> set:
    return {f.name for f in fields(TunnelSettings)}


def _coerce(name: str, raw: Any, source: str) -> Any:
    kind = TunnelSettings.__dataclass_fields__[name].type
    if raw is None:
        raise ConfigurationError(f"{source}: '{name}' has no value")
    text = str(raw).strip()
    try:
        if kind in (int, 'int'):
            return int(text)
        if kind in (float, 'float'):
            return float(text)
    except ValueError as e:
        raise ConfigurationError(f"{source}: '{name}' = {text!r} is not a {getattr(kind, '__name__', kind)}") from e
    return text.lower()


def parse_settings(values: Mapping[str, Any], source: str,
                   base: Optional[TunnelSettings] = None) -> TunnelSettings:
    """Overlay string-valued `values` on `base`; unknown keys are rejected."""
    base = base or TunnelSettings()
    unknown = set(values) - setting_names()
    if unknown:
        raise ConfigurationError(f"{source}: unknown keys {', '.join(sorted(unknown))}")
    changes = {name: _coerce(name, raw, source) for name, raw in values.items()}
    return replace(base, **changes)


def settings_from_env(base: Optional[TunnelSettings] = None,
                      environ: Optional[Mapping[str, str]] = None) -> TunnelSettings:
    """Read TUNNEL_<NAME> variables; unrelated variables are ignored."""
    if environ is None:
        load_dotenv()
        environ = os.environ
    values = {}
    for name in setting_names():
        key = ENV_PREFIX + name.upper()
        if key in environ:
            values[name] = environ[key]
    return parse_settings(values, 'environment', base)


def load_config_file(path: Union[str, Path], base: Optional[TunnelSettings] = None) -> TunnelSettings:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    values = dotenv_values(path)
    return parse_settings(dict(values), str(path), base)


def load_settings(config_path: Optional[Union[str, Path]] = None,
                  environ: Optional[Mapping[str, str]] = None,
                  **overrides: Any) -> TunnelSettings:
    """
    Resolve settings from every source and validate them.

    Args:
        config_path: optional `key = value` file
        environ: environment mapping (defaults to os.environ after load_dotenv)
        **overrides: CLI flag values; None means "not given"

    Raises:
        ConfigurationError: unknown keys, unparseable or out-of-range values
    """
    settings = settings_from_env(environ=environ)
    if config_path is not None:
        settings = load_config_file(config_path, settings)
    return settings.with_overrides(**overrides).validate()


def setup_logging(level: Optional[str] = None) -> None:
    """Configure the root logger on stderr; LOG_LEVEL is used when no level is given."""
    level = (level or os.environ.get('LOG_LEVEL') or 'WARNING').upper()
    numeric = getattr(logging, level, None)
    if not isinstance(numeric, int):
        raise ConfigurationError(f"unknown log level {level!r}")
    logging.basicConfig(
        level=numeric,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )
