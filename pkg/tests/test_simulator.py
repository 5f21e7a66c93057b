import numpy as np
import pytest

from rnnkit.generators import random_subcritical_network
from rnnkit.model import RnnParameters
from rnnkit.simulator import (FrozenChainError, SimulationReport, SupercriticalError,
                              compare_product_form, product_form, replicate, simulate)
from rnnkit.solver import SolverOptions, solve_fixed_point

from conftest import mm1, recurrent_pair


def test_mm1_marginal_and_geometric_law():
    rep = simulate(mm1(), 1e5, seed=1, collect_joint=True)
    assert rep.empirical_q[0] == pytest.approx(0.5, abs=0.01)
    for n in range(6):
        assert rep.joint_histogram[n] == pytest.approx(0.5 ** (n + 1), abs=0.01)


def test_no_excitation_stays_at_zero():
    z = np.zeros((2, 2))
    p = RnnParameters(z, z, [0, 0], [0.3, 0.0], [1, 1], [1.0, 1.0])
    rep = simulate(p, 1000, seed=0)
    np.testing.assert_array_equal(rep.empirical_q, 0)
    assert rep.event_count > 0  # the inhibitory arrivals are no-ops


def test_frozen_chain_raises():
    z = np.zeros((2, 2))
    with pytest.raises(FrozenChainError):
        simulate(RnnParameters(z, z, [0, 0], [0, 0], [1, 1], [1, 1]), 10, seed=0)


def test_supercritical_guard():
    z = np.zeros((1, 1))
    p = RnnParameters(z, z, [2.0], [0.0], [1.0], [1.0])
    with pytest.raises(SupercriticalError):
        simulate(p, 1e6, seed=0, potential_cap=200)


def test_recurrent_pair_product_form():
    p = recurrent_pair()
    rep = simulate(p, 1e5, seed=3, collect_joint=True)
    cmp = compare_product_form(rep, solve_fixed_point(p))
    assert cmp.max_marginal_gap <= 0.01
    assert cmp.total_variation <= 0.02


def test_seed_determinism():
    a = simulate(recurrent_pair(), 2000, seed=11, collect_joint=True)
    b = simulate(recurrent_pair(), 2000, seed=11, collect_joint=True)
    assert a.event_count == b.event_count
    np.testing.assert_array_equal(a.empirical_q, b.empirical_q)
    np.testing.assert_array_equal(a.joint_histogram, b.joint_histogram)
    c = simulate(recurrent_pair(), 2000, seed=12)
    assert c.event_count != a.event_count


def test_joint_histogram_mass():
    rep = simulate(recurrent_pair(), 5000, seed=2, collect_joint=True, k_max=3)
    assert rep.joint_histogram.shape == (4, 4)
    assert rep.joint_histogram.sum() + rep.truncation_mass == pytest.approx(1.0, abs=1e-9)


def test_joint_limited_to_small_networks(rng):
    p = random_subcritical_network(rng, 5)
    with pytest.raises(ValueError):
        simulate(p, 10, seed=0, collect_joint=True)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        simulate(recurrent_pair(), 0, seed=0)
    bad = RnnParameters([[0, 1.0], [0, 0]], np.zeros((2, 2)), [1, 0], [0, 1], [0, 0], [3, 0])
    with pytest.raises(ValueError):
        simulate(bad, 10, seed=0)


def test_product_form_self_comparison():
    q = np.array([0.3, 0.6])
    pf = product_form(q, 10)
    rep = SimulationReport(1.0, 0.0, 0, q.copy(), 0, pf.copy(), 1 - pf.sum(), 10)

    class Steady:
        pass
    s = Steady()
    s.q, s.saturated = q, ()
    cmp = compare_product_form(rep, s)
    assert cmp.total_variation == 0.0 and cmp.max_marginal_gap == 0.0


def test_product_form_refuses_saturated():
    p = RnnParameters.from_weights([[0, 1.0], [0, 0]], None, [2.0, 0.0], [0.0, 2.0])
    steady = solve_fixed_point(p)
    rep = SimulationReport(1.0, 0.0, 0, np.zeros(2), 0)
    with pytest.raises(ValueError, match="product form"):
        compare_product_form(rep, steady)


def test_event_rate_matches_expectation(rng):
    for _ in range(3):
        p = random_subcritical_network(rng, 3, max_q=0.9)
        q = solve_fixed_point(p).q
        rep = simulate(p, 1e5, seed=int(rng.integers(1 << 30)))
        expected = (p.Lambda + p.lambda_).sum() + (p.r * q).sum()
        assert rep.event_count / rep.horizon == pytest.approx(expected, rel=0.05)


def test_replication_seeds():
    reps = replicate(recurrent_pair(), 100, master_seed=6, count=3)
    assert [r.seed for r in reps] == [6, 7, 4]


def test_marginal_error_shrinks_with_horizon():
    p = recurrent_pair()
    q = solve_fixed_point(p).q

    def median_gap(h, master):
        reps = replicate(p, h, master, 20)
        return np.median([np.abs(r.empirical_q - q).max() for r in reps])
    assert median_gap(4000, 1000) <= median_gap(2000, 0)


def test_potentials_nonnegative_under_heavy_inhibition():
    wm = np.array([[0, 2.0], [2.0, 0]])
    p = RnnParameters.from_weights(np.zeros((2, 2)), wm, [1.0, 1.0], [3.0, 3.0])
    rep = simulate(p, 1e4, seed=5, collect_joint=True)
    assert np.all(rep.joint_histogram >= 0)
    q = solve_fixed_point(p).q
    np.testing.assert_allclose(rep.empirical_q, q, atol=0.02)
