import itertools
import math

import numpy as np
import pytest

from markov import (SolverError, StateCapError, analyze, decode_state, dump_matrix,
                    dump_printed_matrices, encode_state,
                    joint_matrix_mc, joint_matrix_product_form, marginal_product_outage,
                    outage_probability, per_relay_matrix, printed_relay_matrix, steady_state)
from modele import make_params, prob_charging, with_changes
from structure import Mode, TransitionMatrix

# N=1, L=1, SNR 10 dB, R=1, kappa=0.5, alpha=1
EXPECTED_ROWS = np.array([
    [0.632121, 0.232544, 0.135335],
    [0.406570, 0.427448, 0.165983],
    [math.exp(-0.6) - math.exp(-0.9), 0.406570, 0.451188],
])
EXPECTED_PI = (0.452342, 0.334847, 0.212817)
EXPECTED_OUTAGE = 0.747070


def test_per_relay_matrix_closed_forms(single_relay):
    p = per_relay_matrix(0, single_relay)
    assert p.order == 3
    assert p.mode == "per-relay"
    assert np.allclose(p.entries, EXPECTED_ROWS, atol=1e-6)
    assert p.entries[2, 0] == pytest.approx(0.142242, abs=1e-6)


@pytest.mark.parametrize("levels", [1, 2, 5, 20])
@pytest.mark.parametrize("rate", [0.0, 0.5, 1.0])
def test_per_relay_matrix_is_stochastic(levels, rate):
    params = make_params(n_relays=2, levels=levels, snr_db=7.0, rate=rate, kappa=0.3,
                         alpha=0.6, mean_g=(1.0, 2.0), mean_h=(0.5, 1.0))
    for i in range(2):
        p = per_relay_matrix(i, params).entries
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(p >= 0.0)


def test_per_relay_matrix_without_harvesting():
    params = make_params(n_relays=1, levels=2, kappa=0.0)
    p = per_relay_matrix(0, params).entries
    assert np.triu(p, k=1).sum() == pytest.approx(0.0, abs=1e-15)
    assert p[0, 0] == 1.0


def test_per_relay_matrix_bad_index(single_relay):
    with pytest.raises(IndexError):
        per_relay_matrix(1, single_relay)


def test_printed_matrix_same_level_term_overshoots_empty_row(single_relay):
    printed = printed_relay_matrix(0, single_relay)
    exact = per_relay_matrix(0, single_relay).entries
    # vide -> vide: G(b_1/(P kappa)) + G(T/P) = G(1) + G(0.3)
    assert printed[0, 0] == pytest.approx((1 - math.exp(-1.0)) + (1 - math.exp(-0.3)), abs=1e-12)
    assert printed[0, 0] == pytest.approx(0.891302, abs=1e-6)
    assert printed[0].sum() > 1.0
    assert np.allclose(printed[0, 1:], exact[0, 1:], atol=1e-12)
    for m in range(3):
        for n in range(m):
            assert printed[m, n] == pytest.approx(exact[m, n], abs=1e-12)


def test_dump_printed_matrices(tmp_path, two_relays):
    path = tmp_path / "q.txt"
    dump_printed_matrices(two_relays, str(path))
    lines = path.read_text().splitlines()
    assert len(lines) == 2 * 4
    assert lines[0] == "relay=0 order=3 mode=printed"
    assert lines[4] == "relay=1 order=3 mode=printed"
    block = np.array([[float(x) for x in line.split()] for line in lines[1:4]])
    assert np.array_equal(block, printed_relay_matrix(0, two_relays))


def test_steady_state_single_relay(single_relay):
    steady = steady_state(per_relay_matrix(0, single_relay))
    assert np.allclose(steady.pi, EXPECTED_PI, atol=1e-4)
    assert steady.pi.sum() == pytest.approx(1.0, abs=1e-12)
    assert steady.residual <= 1e-12


def test_outage_single_relay(single_relay):
    steady = steady_state(joint_matrix_product_form(single_relay))
    assert outage_probability(steady, single_relay) == pytest.approx(EXPECTED_OUTAGE, abs=1e-3)
    assert analyze(single_relay, Mode.DTMC_PRODUCT) == pytest.approx(EXPECTED_OUTAGE, abs=1e-3)


def test_steady_state_swap_and_doubly_stochastic():
    swap = steady_state(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(swap.pi, [0.5, 0.5])
    d = np.array([[0.2, 0.5, 0.3], [0.5, 0.3, 0.2], [0.3, 0.2, 0.5]])
    assert np.allclose(steady_state(TransitionMatrix(entries=d, mode="test")).pi, 1.0 / 3.0)


def test_steady_state_reducible_chain():
    with pytest.raises(SolverError):
        steady_state(np.eye(2))


def test_transition_matrix_validation():
    with pytest.raises(ValueError):
        TransitionMatrix(entries=np.ones((2, 3)) / 3, mode="x")
    with pytest.raises(ValueError):
        TransitionMatrix(entries=np.array([[0.5, 0.4], [0.5, 0.5]]), mode="x")
    with pytest.raises(ValueError):
        TransitionMatrix(entries=np.array([[1.5, -0.5], [0.5, 0.5]]), mode="x")


def test_product_form_single_relay_is_per_relay(single_relay):
    joint = joint_matrix_product_form(single_relay)
    assert np.array_equal(joint.entries, per_relay_matrix(0, single_relay).entries)
    assert joint.mode == "product-form"


def test_product_form_two_relays(two_relays):
    joint = joint_matrix_product_form(two_relays)
    assert joint.order == 9
    assert np.allclose(joint.entries.sum(axis=1), 1.0, atol=1e-12)
    j = encode_state((1, 0), 1).flat_index
    k = encode_state((0, 0), 1).flat_index
    assert joint.entries[j, k] == pytest.approx(0.257001, abs=1e-6)


@pytest.mark.parametrize("n_relays, levels", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_outage_matches_explicit_sum(n_relays, levels):
    params = make_params(n_relays=n_relays, levels=levels, snr_db=8.0, rate=1.0, kappa=0.6,
                         alpha=0.9, mean_g=tuple(1.0 + 0.5 * i for i in range(n_relays)),
                         mean_h=1.0)
    steady = steady_state(joint_matrix_product_form(params))
    expected = 0.0
    for j in range(params.n_states):
        state = decode_state(j, n_relays, levels)
        term = steady.pi[j]
        for i, m in enumerate(state.levels):
            term *= prob_charging(m, i, params)
        expected += term
    assert outage_probability(steady, params) == pytest.approx(expected, abs=1e-12)


def test_marginal_equals_product_form():
    params = make_params(n_relays=2, levels=3, snr_db=12.0, mean_g=(1.0, 0.7))
    assert analyze(params, Mode.DTMC_MARGINAL) == pytest.approx(analyze(params, Mode.DTMC_PRODUCT), abs=1e-9)


def test_marginal_identical_relays(single_relay, two_relays):
    one = marginal_product_outage(single_relay)
    assert one == pytest.approx(EXPECTED_OUTAGE, abs=1e-3)
    assert marginal_product_outage(two_relays) == pytest.approx(one ** 2, abs=1e-12)


def test_outage_probability_dimension_check(single_relay, two_relays):
    steady = steady_state(per_relay_matrix(0, single_relay))
    with pytest.raises(ValueError):
        outage_probability(steady, two_relays)


@pytest.mark.parametrize("levels", [1, 2, 4])
def test_mc_matrix_single_relay_matches_closed_form(levels):
    params = make_params(n_relays=1, levels=levels, snr_db=8.0, rate=0.8, kappa=0.4, alpha=0.8)
    samples = 200_000
    mc = joint_matrix_mc(params, samples_per_state=samples, seed=3)
    assert mc.mode == "mc-joint"
    exact = per_relay_matrix(0, params).entries
    sigma = np.sqrt(exact * (1.0 - exact) / samples)
    assert np.all(np.abs(mc.entries - exact) <= 5 * sigma + 1e-4)


def test_mc_matrix_is_deterministic(two_relays):
    a = joint_matrix_mc(two_relays, samples_per_state=2_000, seed=9)
    b = joint_matrix_mc(two_relays, samples_per_state=2_000, seed=9)
    assert np.array_equal(a.entries, b.entries)
    with pytest.raises(ValueError):
        joint_matrix_mc(two_relays, samples_per_state=0, seed=9)


def test_mc_matrix_only_one_relay_discharges(two_relays):
    mc = joint_matrix_mc(two_relays, samples_per_state=5_000, seed=1).entries
    for j, k in itertools.product(range(9), repeat=2):
        if mc[j, k] == 0.0:
            continue
        before = decode_state(j, 2, 1).levels
        after = decode_state(k, 2, 1).levels
        assert sum(1 for a, b in zip(before, after) if b < a) <= 1


def test_state_cap():
    params = make_params(n_relays=3, levels=100)
    with pytest.raises(StateCapError, match="levels/n_relays"):
        joint_matrix_product_form(params)
    with pytest.raises(StateCapError):
        joint_matrix_mc(with_changes(params, levels=3), samples_per_state=10, seed=1, state_cap=100)
    assert analyze(params, Mode.DTMC_MARGINAL) > 0.0


def test_analyze_rejects_sim_mode(single_relay):
    with pytest.raises(ValueError):
        analyze(single_relay, Mode.SIM)


def test_encode_decode_state():
    assert encode_state((1, 0), 1).flat_index == 3
    assert decode_state(3, 2, 1).levels == (1, 0)
    assert encode_state((2, 2, 2), 1).flat_index == 26
    with pytest.raises(ValueError):
        encode_state((3, 0), 1)
    with pytest.raises(ValueError):
        decode_state(9, 2, 1)


def test_dump_matrix(tmp_path, single_relay):
    matrix = per_relay_matrix(0, single_relay)
    path = tmp_path / "p.txt"
    dump_matrix(matrix, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "order=3 mode=per-relay"
    assert len(lines) == 4
    assert np.array_equal(np.loadtxt(path, skiprows=1), matrix.entries)


@pytest.mark.slow
def test_iterative_solver_on_large_chain():
    # (63+2)^2 = 4225 états: au-delà de la résolution directe
    params = make_params(n_relays=2, levels=63, snr_db=15.0)
    product = analyze(params, Mode.DTMC_PRODUCT)
    assert product == pytest.approx(marginal_product_outage(params), abs=1e-6)
