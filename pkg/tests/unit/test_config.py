"""
Unit tests for settings resolution and logging setup.
"""
import logging

import pytest

from core.tunnel_engine.config import (TunnelSettings, load_config_file,
                                       load_settings, parse_settings,
                                       settings_from_env, setup_logging)
from core.tunnel_engine.exceptions import ConfigurationError
from core.tunnel_engine.strategy import Side


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / 'tunnel.cfg'
    path.write_text("# replay settings\nt_threshold = 0.9\nrange_window = 30\nside = put\n")
    return path


class TestTunnelSettings:

    def test_defaults_validate(self):
        settings = TunnelSettings().validate()
        assert settings.risk_free_rate == 0.03
        assert settings.strategy_config().side is Side.CALL
        assert settings.range_config().window == 20

    def test_out_of_range_becomes_configuration_error(self):
        with pytest.raises(ConfigurationError, match='t_threshold'):
            TunnelSettings(t_threshold=1.5).validate()

    def test_non_positive_rate(self):
        with pytest.raises(ConfigurationError):
            TunnelSettings(risk_free_rate=0.0).validate()

    def test_bad_side(self):
        with pytest.raises(ConfigurationError):
            TunnelSettings(side='strangle').validate()

    def test_none_overrides_ignored(self):
        settings = TunnelSettings().with_overrides(t_threshold=None, tick=0.05)
        assert settings.t_threshold == 0.95
        assert settings.tick == 0.05

    def test_unknown_override(self):
        with pytest.raises(ConfigurationError):
            TunnelSettings().with_overrides(leverage=3)


class TestParseSettings:

    def test_types_coerced(self):
        settings = parse_settings({'vol_lookback': '7', 'vol_drop_ratio': ' 0.25 ', 'side': 'PUT'}, 'test')
        assert settings.vol_lookback == 7
        assert settings.vol_drop_ratio == 0.25
        assert settings.side == 'put'

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError, match='unknown keys'):
            parse_settings({'threshold': '0.9'}, 'test')

    def test_bad_number_names_source(self):
        with pytest.raises(ConfigurationError, match='cfg:'):
            parse_settings({'range_window': 'twenty'}, 'cfg')


class TestSources:

    def test_environment(self):
        settings = settings_from_env(environ={'TUNNEL_T_THRESHOLD': '0.97', 'HOME': '/root'})
        assert settings.t_threshold == 0.97

    def test_config_file(self, config_file):
        settings = load_config_file(config_file)
        assert (settings.t_threshold, settings.range_window, settings.side) == (0.9, 30, 'put')

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match='not found'):
            load_config_file(tmp_path / 'missing.cfg')

    def test_precedence(self, config_file):
        environ = {'TUNNEL_T_THRESHOLD': '0.97', 'TUNNEL_TICK': '0.05'}
        settings = load_settings(config_file, environ=environ, range_window=25)
        # file beats environment, flags beat file, untouched env values survive
        assert settings.t_threshold == 0.9
        assert settings.range_window == 25
        assert settings.tick == 0.05

    def test_invalid_resolved_value(self):
        with pytest.raises(ConfigurationError):
            load_settings(environ={'TUNNEL_VOL_LOOKBACK': '1'})


class TestSetupLogging:

    def test_explicit_level(self):
        setup_logging('debug')
        assert logging.getLogger().level == logging.DEBUG

    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv('LOG_LEVEL', 'ERROR')
        setup_logging()
        assert logging.getLogger().level == logging.ERROR

    def test_default_warning(self, monkeypatch):
        monkeypatch.delenv('LOG_LEVEL', raising=False)
        setup_logging()
        assert logging.getLogger().level == logging.WARNING

    def test_unknown_level(self):
        with pytest.raises(ConfigurationError):
            setup_logging('chatty')
