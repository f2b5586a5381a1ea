import math

import pytest

from conventions import INF, db_to_linear, energy_ratio, linear_to_db, snr_db_to_power
from outils import WORKERS_ENV, binomial_interval, derive_seed, diversity_slope, resolve_workers


def test_db_conversions():
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert db_to_linear(0.0) == 1.0
    assert linear_to_db(100.0) == pytest.approx(20.0)
    assert snr_db_to_power(20.0, noise=2.0) == pytest.approx(200.0)


def test_energy_ratio_conventions():
    assert energy_ratio(0.0, 0.0) == 0.0
    assert energy_ratio(3.0, 0.0) == INF
    assert energy_ratio(3.0, 5.0) == pytest.approx(0.6)


def test_binomial_interval():
    p, se, lo, hi = binomial_interval(250, 1000)
    assert p == 0.25
    assert se == pytest.approx(math.sqrt(0.25 * 0.75 / 1000))
    assert lo == pytest.approx(0.25 - 2.576 * se)
    assert hi == pytest.approx(0.25 + 2.576 * se)
    assert binomial_interval(0, 10) == (0.0, 0.0, 0.0, 0.0)
    assert binomial_interval(10, 10)[2:] == (1.0, 1.0)
    with pytest.raises(ValueError):
        binomial_interval(0, 0)


def test_derive_seed():
    assert derive_seed(1, 0) == derive_seed(1, 0)
    seeds = {derive_seed(1, k) for k in range(100)}
    assert len(seeds) == 100
    assert derive_seed(1, 3) != derive_seed(2, 3)


def test_resolve_workers(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert resolve_workers(4, 10) == 4
    assert resolve_workers(4, 2) == 2
    assert resolve_workers(None, 1) == 1
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert resolve_workers(8, 10) == 3
    monkeypatch.setenv(WORKERS_ENV, "beaucoup")
    with pytest.raises(ValueError):
        resolve_workers(8, 10)


def test_diversity_slope():
    snr = [10.0, 20.0, 30.0, 40.0]
    p_out = [10 ** (1.5 - 0.2 * s) for s in snr]  # pente -2, 20 et 30 dB dans la fenêtre
    assert diversity_slope(snr, p_out) == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        diversity_slope([0.0, 10.0], [0.5, 0.2])
