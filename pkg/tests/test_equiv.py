import numpy as np
import pytest

from symmarkov.energy import harmonic_solve
from symmarkov.equiv import (EquivalenceData, general_equivalence_rn, laplacian_prime_identity,
                             markov_prime_via_formula, q_isometry_check, transform_measure)
from symmarkov.errors import (AsymmetryError, NonpositiveFactorError, NonProductFormError,
                              SupportMismatchError, SupportViolationError)
from symmarkov.generators import birth_death, complete_graph, path_graph, random_connected
from symmarkov.measure import FiniteSymmetricMeasure
from symmarkov.operators import apply_Delta, apply_P, markov_system


def random_r(rng, n):
    r = rng.uniform(0.2, 3.0, (n, n))
    return np.triu(r) + np.triu(r, 1).T


def test_identity_transforms(random_systems):
    for s in random_systems:
        m = s.measure
        for eq in (EquivalenceData(r=np.ones((m.n, m.n))), EquivalenceData.identity(m.n)):
            assert np.array_equal(transform_measure(m, eq).dense(), m.dense())


def test_k2_product():
    m = complete_graph(2)
    mp = transform_measure(m, EquivalenceData(q=[1.0, 2.0]))
    assert mp.dense()[0, 1] == 2.0
    assert np.array_equal(mp.c, [2.0, 2.0])


def test_factor_validation():
    with pytest.raises(NonpositiveFactorError):
        EquivalenceData(q=[1.0, 0.0])
    with pytest.raises(AsymmetryError):
        EquivalenceData(r=[[1.0, 2.0], [1.0, 1.0]])
    with pytest.raises(ValueError):
        EquivalenceData()
    with pytest.raises(NonpositiveFactorError):
        transform_measure(complete_graph(2), EquivalenceData(r=[[1.0, -1.0], [-1.0, 1.0]]))
    # zero off the support is harmless
    mp = transform_measure(path_graph(3), EquivalenceData(r=[[1, 1, 0], [1, 1, 1], [0, 1, 1.0]]))
    assert np.array_equal(mp.dense(), path_graph(3).dense())


def test_markov_prime_identity(random_systems):
    s = random_systems[0]
    rep = markov_prime_via_formula(s, EquivalenceData(r=np.ones((s.n, s.n))), np.arange(s.n, dtype=float))
    assert np.allclose(rep.value, apply_P(s, np.arange(s.n, dtype=float)), rtol=1e-14, atol=1e-14)


def test_markov_prime_k2():
    s = markov_system(complete_graph(2))
    rep = markov_prime_via_formula(s, EquivalenceData(q=[1.0, 2.0]), [1.0, 0.0])
    # P' of K2 is still the swap
    assert np.allclose(rep.direct, [0.0, 1.0], atol=1e-15)
    assert np.allclose(rep.value, rep.direct, atol=1e-15)
    assert rep.passed()


def test_markov_prime_random(rng):
    for _ in range(20):
        s = markov_system(random_connected(6, rng))
        rep = markov_prime_via_formula(s, EquivalenceData(r=random_r(rng, 6)), rng.standard_normal(6))
        assert max(rep.residuals.values()) <= 1e-12


def test_laplacian_identity_trivial_and_random(rng):
    s = markov_system(complete_graph(4))
    f = rng.standard_normal(4)
    rep = laplacian_prime_identity(s, EquivalenceData.identity(4), f)
    assert np.allclose(rep.direct, apply_Delta(s, f), rtol=1e-14, atol=1e-14)
    for _ in range(20):
        rep = laplacian_prime_identity(s, EquivalenceData(q=rng.uniform(0.2, 3, 4)), rng.standard_normal(4))
        assert rep.full_residual <= 1e-12


def test_laplacian_reduced_harmonic():
    s = markov_system(birth_death(7))
    q = harmonic_solve(s, [0, 6], [1.0, 3.0])
    f = np.linspace(-1, 1, 7)
    rep = laplacian_prime_identity(s, EquivalenceData(q=q), f, interior=range(1, 6))
    assert rep.reduced_residual <= 1e-12 and rep.harmonic_equivalence and rep.passed()
    # h / q is harmonic for the primed chain exactly when h is harmonic for the original
    h = harmonic_solve(s, [0, 6], [0.0, 5.0])
    rep = laplacian_prime_identity(s, EquivalenceData(q=q), h / q, interior=range(1, 6))
    assert np.max(np.abs(rep.direct[1:6])) <= 1e-10 and rep.harmonic_equivalence


def test_laplacian_needs_product():
    s = markov_system(complete_graph(3))
    with pytest.raises(NonProductFormError):
        laplacian_prime_identity(s, EquivalenceData(r=np.ones((3, 3))), np.ones(3))


def test_q_isometry():
    s = markov_system(birth_death(7))
    q = harmonic_solve(s, [0, 6], [1.0, 2.0])
    res = q_isometry_check(s, q, np.eye(7)[3])
    assert res.residual <= 1e-10
    assert q_isometry_check(s, q, np.zeros(7)) == (0.0, 0.0, 0.0)
    k = markov_system(complete_graph(4))
    assert q_isometry_check(k, np.ones(4), np.arange(4.0)).residual <= 1e-15


def test_q_isometry_support_violation():
    s = markov_system(birth_death(7))
    q = harmonic_solve(s, [0, 6], [1.0, 2.0])
    with pytest.raises(SupportViolationError):
        q_isometry_check(s, q, np.eye(7)[0])


def test_rn_same_base_product(rng):
    m = random_connected(6, rng)
    q = rng.uniform(0.5, 2.0, 6)
    rep = general_equivalence_rn(m, transform_measure(m, EquivalenceData(q=q)), q=q)
    assert np.array_equal(rep.m, np.ones(6))
    assert np.allclose(rep.phi, q, rtol=1e-15)
    assert rep.product_residual <= 1e-12 and rep.general_residual <= 1e-12


def test_rn_scaled_base():
    # d mu / d mu' for mu' = 2 mu
    m = path_graph(4)
    mp = FiniteSymmetricMeasure(2 * m.mu, m.dense())
    rep = general_equivalence_rn(m, mp)
    assert np.array_equal(rep.m, np.full(4, 0.5))
    on = m.dense() > 0
    assert np.array_equal(rep.table[on], np.full(on.sum(), 0.5))


def test_rn_random(rng):
    for _ in range(10):
        m = random_connected(7, rng)
        r = random_r(rng, 7)
        mp = FiniteSymmetricMeasure(rng.uniform(0.5, 2, 7), r * m.dense())
        assert general_equivalence_rn(m, mp).general_residual <= 1e-12


def test_rn_support_mismatch():
    with pytest.raises(SupportMismatchError):
        general_equivalence_rn(path_graph(3), complete_graph(3))
