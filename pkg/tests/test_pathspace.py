import numpy as np
import pytest

from symmarkov.energy import harmonic_solve
from symmarkov.errors import EmptyStartError, HorizonExceededError
from symmarkov.generators import birth_death, complete_graph, cycle_graph, path_graph, random_connected
from symmarkov.measure import rho_n_mass
from symmarkov.operators import markov_system
from symmarkov.pathspace import (StartLaw, check_distribution_reversal, estimate_lambda_event,
                                 martingale_diagnostic, sample_paths, transition_counts)


def test_two_cycle_is_deterministic(two_cycle):
    ens = sample_paths(markov_system(two_cycle), [0], 3, 50, seed=1)
    assert np.all(ens.paths == [0, 1, 0, 1])


def test_start_law(k3):
    s = markov_system(k3)
    ens = sample_paths(s, [0], 4, 200, seed=2)
    assert np.all(ens.paths[:, 0] == 0)
    law = StartLaw.from_set(markov_system(path_graph(3)), [0, 1])
    assert law.states == (0, 1) and np.allclose(law.weights, [1 / 3, 2 / 3]) and law.nu_A == 3.0
    with pytest.raises(EmptyStartError):
        StartLaw.from_set(s, [])


def test_reproducible_and_counter_based(rng):
    s = markov_system(random_connected(6, rng))
    a = sample_paths(s, [0, 2], 5, 300, seed=7)
    b = sample_paths(s, [0, 2], 5, 300, seed=7)
    assert np.array_equal(a.paths, b.paths) and a.digest() == b.digest()
    # fewer paths are a prefix of more paths
    c = sample_paths(s, [0, 2], 5, 100, seed=7)
    assert np.array_equal(a.paths[:100], c.paths)
    assert sample_paths(s, [0, 2], 5, 300, seed=8).digest() != a.digest()
    assert not a.paths.flags.writeable


def test_paths_follow_edges(rng):
    m = random_connected(8, rng, density=0.2)
    ens = sample_paths(markov_system(m), range(8), 20, 500, seed=3)
    counts = transition_counts(ens, 8)
    assert np.all(counts[m.dense() == 0] == 0)
    assert counts.sum() == 500 * 20


def test_sample_argument_checks(two_cycle):
    s = markov_system(two_cycle)
    with pytest.raises(ValueError):
        sample_paths(s, [0], 3, 0)
    with pytest.raises(ValueError):
        sample_paths(s, [0], -1, 5)


def test_lambda_examples(two_cycle):
    s = markov_system(two_cycle)
    ens = sample_paths(s, [0], 2, 100, seed=0)
    est = estimate_lambda_event(ens, [0], [1], 1)
    assert est.value == 1.0 == rho_n_mass(two_cycle, 1, [0], [1])
    assert est.stderr == 0.0
    p = path_graph(3)
    ens = sample_paths(markov_system(p), [0, 1], 3, 1000, seed=4)
    full = estimate_lambda_event(ens, [0, 1], range(3), 3)
    assert full.value == 3.0 and full.stderr == 0.0


def test_lambda_three_path_oracle():
    p = path_graph(3)
    ens = sample_paths(markov_system(p), [0], 2, 100_000, seed=0)
    est = estimate_lambda_event(ens, [0], [2], 2)
    exact = rho_n_mass(p, 2, [0], [2])
    assert exact == 0.5
    assert abs(est.value - exact) <= 3 * est.stderr


def test_lambda_errors(two_cycle):
    ens = sample_paths(markov_system(two_cycle), [0], 2, 10)
    with pytest.raises(HorizonExceededError):
        estimate_lambda_event(ens, [0], [1], 3)
    with pytest.raises(ValueError):
        estimate_lambda_event(ens, [1], [0], 1)


def test_reversal(rng):
    p = markov_system(path_graph(3))
    r = check_distribution_reversal(p, [0], [1])
    assert r.forward == r.backward == 1.0
    assert check_distribution_reversal(p, [0, 2], [0, 2]).residual == 0.0
    for _ in range(20):
        s = markov_system(random_connected(10, rng))
        A0 = np.flatnonzero(rng.random(10) < 0.5)
        A1 = np.flatnonzero(rng.random(10) < 0.5)
        assert check_distribution_reversal(s, A0, A1).residual <= 1e-12


def test_martingale_constant(k3):
    s = markov_system(k3)
    ens = sample_paths(s, [0], 5, 100)
    rep = martingale_diagnostic(s, np.full(3, 2.0), ens)
    assert rep.exact_residual == 0.0 and rep.mean_drift == 0.0 and rep.passed


def test_martingale_birth_death():
    s = markov_system(birth_death(7))
    h = harmonic_solve(s, [0, 6], [0.0, 1.0])
    ens = sample_paths(s, range(1, 6), 10, 30_000, seed=0)
    rep = martingale_diagnostic(s, h, ens, region=range(1, 6))
    assert rep.exact_residual <= 1e-12
    assert rep.increments >= 100_000
    assert rep.empirical_passed


def test_martingale_not_harmonic(k3):
    s = markov_system(k3)
    ens = sample_paths(s, [0], 3, 100)
    rep = martingale_diagnostic(s, [1.0, 0.0, 0.0], ens)
    # P chi_0 = (0, 1/2, 1/2)
    assert np.array_equal(rep.exact_residuals, [1.0, 0.5, 0.5])
    assert not rep.exact_passed and not rep.passed
