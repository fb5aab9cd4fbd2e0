"""
Shared fixtures for the tunnel engine test suite.
"""
import sys
from pathlib import Path

import pytest

# Add the repository root so `core` imports without installation
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.tunnel_engine.reference_events import get_event, replay_fixture  # noqa: E402
from core.tunnel_engine.tunneling_core import MarketParams  # noqa: E402


@pytest.fixture
def lnkd_params():
    """r = 3%, sigma = 47%: the LNKD reference row."""
    return MarketParams(r=0.03, sigma=0.47)


@pytest.fixture
def lnkd_row():
    return get_event('LNKD')


@pytest.fixture
def lnkd_fixture(lnkd_row):
    """(bars, vols) replaying the LNKD range and breakout."""
    return replay_fixture(lnkd_row)
