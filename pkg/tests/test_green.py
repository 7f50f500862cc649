import numpy as np
import pytest

from symmarkov.energy import harmonic_solve
from symmarkov.errors import RecurrentDomainError
from symmarkov.generators import block_diagonal, path_graph, random_connected
from symmarkov.green import (green_decompose, green_energy_identities, green_series, green_solve,
                             green_span_rank, kill, power_energy_residual, symmetric_pair_check,
                             tail_bound)
from symmarkov.operators import markov_system


@pytest.fixture
def window5():
    return kill(markov_system(path_graph(5)), [1, 2, 3])


def test_kill_examples(window5):
    ks = kill(markov_system(path_graph(3)), [1])
    assert np.array_equal(ks.P_D, [[0.0]]) and ks.spectral_radius == 0.0
    assert window5.spectral_radius == pytest.approx(np.sqrt(0.5), rel=1e-14)
    assert np.array_equal(window5.ground, [1.0, 0.0, 1.0])
    with pytest.raises(RecurrentDomainError):
        kill(markov_system(path_graph(5)), range(5))


def test_kill_component_without_exit():
    m = block_diagonal(path_graph(3), path_graph(2))
    with pytest.raises(RecurrentDomainError):
        kill(markov_system(m), [1, 3, 4])


def test_green_solve_examples(window5):
    ks = kill(markov_system(path_graph(3)), [1])
    assert green_solve(ks, [1]).values == pytest.approx([1.0], rel=1e-15)
    G = green_solve(window5, [2]).values
    assert np.allclose(G, [1.0, 2.0, 1.0], rtol=1e-14)
    v = np.eye(3)[1]
    total = np.zeros(3)
    for _ in range(201):
        total += v
        v = window5.P_D @ v
    assert np.max(np.abs(total - G)) <= 1e-10
    assert np.array_equal(green_solve(window5, []).values, np.zeros(3))
    with pytest.raises(ValueError):
        green_solve(window5, [0])


def test_green_series(window5):
    ks = kill(markov_system(path_graph(3)), [1])
    res = green_series(ks, [1])
    assert res.terms == 1 and np.array_equal(res.green.values, [1.0])
    res = green_series(window5, [2], tol=1e-12)
    assert np.max(np.abs(res.green.values - green_solve(window5, [2]).values)) <= 1e-10
    assert res.tail < 1e-12
    big = green_series(window5, [2], tol=100.0)
    assert big.terms == 1 and np.array_equal(big.green.values, [0, 1, 0]) and big.tail < 100.0


def test_tail_bound_is_valid(rng):
    for _ in range(5):
        s = markov_system(random_connected(12, rng))
        ks = kill(s, range(8))
        v = rng.random(8)
        exact = np.linalg.solve(np.eye(8) - ks.P_D, v)
        assert np.max(np.abs(exact)) <= tail_bound(ks, v) * (1 + 1e-12)


def test_energy_identities(window5):
    ks = kill(markov_system(path_graph(3)), [1])
    rep = green_energy_identities(ks, [1], [1])
    assert rep.inner == pytest.approx(2.0) and rep.partial_sum == 2.0
    rep = green_energy_identities(window5, [2], [3])
    assert rep.inner_residual <= 1e-8 and rep.passed
    rep = green_energy_identities(window5, [2], [3], tests=[np.zeros(3)])
    assert rep.riesz == ((0.0, 0.0),)


def test_energy_identities_random(rng):
    for _ in range(5):
        s = markov_system(random_connected(20, rng))
        ks = kill(s, range(14))
        rep = green_energy_identities(ks, [0, 3], [3, 5, 9], seed=1)
        assert rep.passed and rep.riesz_residual <= 1e-10


def test_symmetric_pair(window5):
    r = symmetric_pair_check(window5, [2], [2])
    assert r.nu_overlap == 2.0
    assert r.energy_side == pytest.approx(2.0, rel=1e-14) and r.l2_side == pytest.approx(2.0, rel=1e-14)
    assert symmetric_pair_check(window5, [1], [3]).residual <= 1e-10
    assert symmetric_pair_check(window5, [1], [3]).nu_overlap == 0.0
    sub = symmetric_pair_check(window5, [2], [1, 2, 3])
    assert sub.nu_overlap == 2.0 and sub.residual <= 1e-10


def test_decompose(rng):
    s = markov_system(path_graph(5))
    ks = kill(s, [1, 2, 3])
    h = harmonic_solve(s, [0, 4], [1.0, 3.0])
    d = green_decompose(ks, h)
    assert np.max(np.abs(d.phi)) <= 1e-14
    G = green_solve(ks, [2]).on_parent(5)
    d = green_decompose(ks, G)
    assert np.allclose(d.phi, [0, 1, 0], atol=1e-14)
    p7 = markov_system(path_graph(7))
    ks7 = kill(p7, range(1, 6))
    for _ in range(10):
        d = green_decompose(ks7, rng.standard_normal(7))
        assert d.reconstruction_residual <= 1e-10 and d.harmonic_residual <= 1e-12


def test_power_energy_and_span(rng):
    s = markov_system(random_connected(15, rng))
    ks = kill(s, range(10))
    for n in range(5):
        assert power_energy_residual(ks, [0, 1, 2], n) <= 1e-12
    assert green_span_rank(ks) == 10
