"""
Vérifications statistiques longues (courbes d'outage de référence).
Lancer avec: pytest --runslow tests/test_acceptance.py
"""
import math

import numpy as np
import pytest

from markov import analyze, per_relay_matrix, steady_state
from modele import make_params
from outils import diversity_slope
from simulateur import run, run_sweep
from structure import Mode, Policy, SimConfig

pytestmark = pytest.mark.slow

WARMUP = 10_000


def half_width(est):
    return (est.ci_high - est.ci_low) / 2


def sweep(params, axis, values, slots=1_000_000, policy=Policy.BARS, seed=1, replicas=1):
    base = SimConfig(params=params, policy=policy, slots=slots, warmup_slots=WARMUP, seed=seed)
    return run_sweep(base, axis, values, replicas=replicas)


def test_theory_matches_simulation_two_relays():
    snrs = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
    params = make_params(n_relays=2, levels=1, alpha=1.0, kappa=0.5, rate=1.0)
    simulated = sweep(params, "snr_db", snrs)
    for snr, est in zip(snrs, simulated):
        point = make_params(n_relays=2, levels=1, snr_db=snr, alpha=1.0, kappa=0.5, rate=1.0)
        theory = analyze(point, Mode.DTMC_MC, samples_per_state=1_000_000, seed=7)
        assert abs(theory - est.p_out) <= max(0.05 * theory, half_width(est)), snr


def test_single_relay_chain(single_relay):
    pi = steady_state(per_relay_matrix(0, single_relay)).pi
    assert np.allclose(pi, (0.4523, 0.3348, 0.2128), atol=1e-4)
    theory = analyze(single_relay, Mode.DTMC_PRODUCT)
    est = run(SimConfig(params=single_relay, slots=1_000_000, warmup_slots=WARMUP, seed=11))
    assert abs(est.p_out - theory) <= max(half_width(est), 0.003)


def test_error_floor_with_one_level():
    one = sweep(make_params(n_relays=2, levels=1), "snr_db", [30.0, 40.0])
    assert one[1].p_out >= 0.5 * one[0].p_out
    fine = sweep(make_params(n_relays=2, levels=100), "snr_db", [30.0, 40.0], slots=10_000_000)
    assert fine[0].p_out > 10 * fine[1].p_out


def test_diversity_order_two_relays():
    snrs = [10.0, 15.0, 20.0, 25.0, 30.0, 35.0]
    params = make_params(n_relays=2, levels=100, kappa=0.5, alpha=1.0)
    est = sweep(params, "snr_db", snrs, slots=10_000_000)
    slope = diversity_slope(snrs, [e.p_out for e in est])
    assert slope == pytest.approx(-2.0, abs=0.5)


def test_diversity_order_three_relays():
    # 10 trajectoires de 1e6 slots par point
    snrs = [10.0, 12.5, 15.0, 17.5, 20.0, 22.5, 25.0]
    params = make_params(n_relays=3, levels=100, kappa=0.5, alpha=1.0)
    est = sweep(params, "snr_db", snrs, replicas=10)
    slope = diversity_slope(snrs, [e.p_out for e in est])
    assert slope == pytest.approx(-3.0, abs=0.75)


@pytest.mark.parametrize("n_relays, replicas", [(2, 1), (3, 10)])
def test_bars_beats_csi_and_benchmark(n_relays, replicas):
    snrs = [15.0, 20.0, 25.0]
    params = make_params(n_relays=n_relays, levels=10, kappa=0.5, alpha=1.0)
    bars = sweep(params, "snr_db", snrs, policy=Policy.BARS, replicas=replicas)
    for other in (Policy.CSI, Policy.BENCHMARK):
        rival = sweep(params, "snr_db", snrs, policy=other, seed=2, replicas=replicas)
        for b, r in zip(bars, rival):
            assert r.p_out - b.p_out > half_width(b) + half_width(r), other


def test_kappa_saturates():
    params = make_params(n_relays=3, levels=100, snr_db=20.0)
    low, mid, high = (e.p_out for e in sweep(params, "kappa", [0.1, 0.5, 1.0]))
    assert low - mid > 5 * (mid - high)


def test_alpha_diminishing_returns():
    # gains lus sur l'échelle log de p_out (décades gagnées entre alpha=0.2 et 0.6)
    decades = {}
    for n in (2, 3, 4):
        params = make_params(n_relays=n, levels=100, snr_db=20.0, kappa=0.5, rate=2.0)
        a02, a06, a10 = (e.p_out for e in sweep(params, "alpha", [0.2, 0.6, 1.0]))
        assert a02 - a06 > 3 * (a06 - a10), n
        assert a06 > 0.0, n
        decades[n] = math.log10(a02 / a06)
    assert decades[4] > decades[2]


def test_no_harvesting_means_permanent_outage():
    params = make_params(n_relays=3, levels=10, kappa=0.0)
    est = run(SimConfig(params=params, slots=200_000, warmup_slots=WARMUP, seed=5))
    assert est.p_out == 1.0
