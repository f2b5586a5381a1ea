import sys
from pathlib import Path

import pytest

SOURCE = Path(__file__).resolve().parents[1] / "Source"
if str(SOURCE) not in sys.path:
    sys.path.insert(0, str(SOURCE))

from modele import make_params  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="lance aussi les tests statistiques longs")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: test statistique long (--runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="test long: utiliser --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def single_relay():
    """N=1, L=1, alpha=1, kappa=0.5, R=1 (T=3), SNR=10 dB (P=10), N0=1."""
    return make_params(n_relays=1, levels=1, snr_db=10.0, rate=1.0, kappa=0.5, alpha=1.0)


@pytest.fixture
def two_relays():
    return make_params(n_relays=2, levels=1, snr_db=10.0, rate=1.0, kappa=0.5, alpha=1.0)
