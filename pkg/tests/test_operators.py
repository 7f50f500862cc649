import numpy as np
import pytest

from symmarkov.errors import DimensionError
from symmarkov.generators import star_graph
from symmarkov.measure import FiniteSymmetricMeasure, indicator
from symmarkov.operators import (apply_Delta, apply_P, apply_P_power, apply_R, coembed_Jstar, embed_J,
                                 l1_norm, l2_inner, l2_norm, l2_rho_norm, laplacian_spectrum,
                                 markov_system, mu_P_density, reversibility_battery, rho_n_form,
                                 spectrum_P)


def test_R_on_two_cycle(two_cycle):
    s = markov_system(two_cycle)
    assert np.array_equal(apply_R(s, [3.0, 5.0]), [5.0, 3.0])
    assert np.array_equal(apply_R(s, [0.0, 0.0]), [0.0, 0.0])


def test_R_of_one_is_c(random_systems):
    for s in random_systems:
        assert np.allclose(apply_R(s, np.ones(s.n)), s.c, rtol=1e-14)


def test_P_examples(path3):
    s = markov_system(path3)
    assert np.array_equal(apply_P(s, [1.0, 0.0, 0.0]), [0.0, 0.5, 0.0])
    assert np.allclose(apply_P(s, np.ones(3)), 1.0, rtol=0, atol=1e-15)


def test_P_rows_and_positivity(random_systems, rng):
    for s in random_systems:
        P = s.dense_P()
        assert np.max(np.abs(P.sum(axis=1) - 1)) <= 1e-14
        f = rng.random(s.n)
        assert np.all(apply_P(s, f) >= 0)


def test_R_is_c_times_P(random_systems):
    # equal up to a couple of ulps: W/mu versus (W/nu)*(nu/mu)
    for s in random_systems:
        R = s.R
        cP = s.c[:, None] * s.dense_P()
        assert np.max(np.abs(R - cP) / np.maximum(np.abs(R), 1e-300)) <= 4e-16


def test_delta_examples(two_cycle):
    s = markov_system(two_cycle)
    assert np.array_equal(apply_Delta(s, [1.0, 0.0]), [1.0, -1.0])
    assert np.array_equal(apply_Delta(s, [2.0, 2.0]), [0.0, 0.0])


def test_delta_three_forms_agree(random_systems, rng):
    for s in random_systems:
        f = rng.standard_normal(s.n)
        d = apply_Delta(s, f)
        for method in ("c_minus_R", "c_I_minus_P"):
            assert np.max(np.abs(apply_Delta(s, f, method) - d)) <= 1e-12 * (1 + np.max(np.abs(d)))
    with pytest.raises(ValueError):
        apply_Delta(random_systems[0], np.zeros(random_systems[0].n), "nope")


def test_dimension_errors(path3):
    s = markov_system(path3)
    for fn in (apply_R, apply_P, apply_Delta):
        with pytest.raises(DimensionError):
            fn(s, [1.0, 2.0])
    with pytest.raises(DimensionError):
        coembed_Jstar(s, np.zeros((2, 2)))


def test_embedding_isometry(random_systems, rng):
    for s in random_systems:
        f = rng.standard_normal(s.n)
        Jf = embed_J(s, f)
        assert abs(l2_rho_norm(s, Jf) - l2_norm(f, s.nu)) <= 1e-12 * (1 + l2_norm(f, s.nu))
        assert np.max(np.abs(coembed_Jstar(s, Jf) - f)) <= 1e-12 * (1 + np.max(np.abs(f)))
        g = np.repeat(f[None, :], s.n, axis=0)
        assert np.allclose(coembed_Jstar(s, g), apply_P(s, f), rtol=1e-12, atol=1e-13)


def test_embedding_two_cycle(two_cycle):
    s = markov_system(two_cycle)
    assert l2_rho_norm(s, embed_J(s, [1.0, 0.0])) ** 2 == 1.0


def test_Jstar_is_adjoint(random_systems, rng):
    for s in random_systems:
        f = rng.standard_normal(s.n)
        g = rng.standard_normal((s.n, s.n))
        lhs = float(np.sum(s.measure.dense() * embed_J(s, f) * g))
        rhs = l2_inner(f, coembed_Jstar(s, g), s.nu)
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_spectrum_examples(two_cycle, k3):
    assert np.allclose(spectrum_P(markov_system(two_cycle)), [-1, 1], atol=1e-15)
    assert np.allclose(spectrum_P(markov_system(k3)), [-0.5, -0.5, 1], atol=1e-15)


def test_spectrum_containment(random_systems):
    for s in random_systems:
        ev = spectrum_P(s)
        assert ev[0] >= -1 - 1e-10 and ev[-1] <= 1 + 1e-10
        assert abs(ev[-1] - 1) <= 1e-12
        assert laplacian_spectrum(s)[0] >= -1e-10


def test_contractivity(random_systems, rng):
    for s in random_systems:
        for _ in range(80):
            f = rng.standard_normal(s.n)
            Pf = apply_P(s, f)
            assert l2_norm(Pf, s.nu) <= l2_norm(f, s.nu) * (1 + 1e-12)
            assert l1_norm(Pf, s.nu) <= l1_norm(f, s.nu) * (1 + 1e-12)


def test_R_symmetric_in_mu(random_systems, rng):
    for s in random_systems:
        f, g = rng.standard_normal(s.n), rng.standard_normal(s.n)
        a = l2_inner(g, apply_R(s, f), s.mu)
        b = l2_inner(apply_R(s, g), f, s.mu)
        assert abs(a - b) <= 1e-12 * (1 + abs(a))


def test_battery_valid_measure(random_systems):
    for s in random_systems:
        rep = reversibility_battery(s)
        assert rep.all_passed
        assert rep.max_residual <= 1e-12
        assert [c.clause for c in rep.clauses] == ["i", "ii", "iii", "iv", "v", "vi", "vii"]


def test_battery_flags_broken_input():
    W = np.array([[0.0, 1.0, 0.0], [2.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    broken = FiniteSymmetricMeasure(np.ones(3), W, check=False)
    rep = reversibility_battery(markov_system(broken))
    assert rep.all_failed


def test_battery_invariance_two_cycle(two_cycle):
    rep = reversibility_battery(markov_system(two_cycle))
    iii = [c for c in rep.clauses if c.clause == "iii"][0]
    assert iii.residual == 0.0


def test_battery_report_dict(two_cycle):
    d = reversibility_battery(markov_system(two_cycle), n_max=3).to_dict()
    assert d["depth"] == 3 and d["all_passed"]
    assert set(d["clauses"][0]) == {"clause", "description", "passed", "residual"}


def test_mu_P_density_examples(two_cycle, k3):
    assert np.allclose(mu_P_density(markov_system(two_cycle)), [1, 1], rtol=1e-15)
    assert np.allclose(mu_P_density(markov_system(k3)), [1, 1, 1], rtol=1e-15)
    # star: center 0 with three leaves
    assert np.allclose(mu_P_density(markov_system(star_graph(3))), [3, 1 / 3, 1 / 3, 1 / 3], rtol=1e-14)


def test_rho_n_form_and_ladder(random_systems, rng):
    for s in random_systems:
        A = indicator(np.flatnonzero(rng.random(s.n) < 0.5), s.n)
        idx = np.flatnonzero(A)
        for n in range(5):
            v = apply_P_power(s, A, n)
            r2n = rho_n_form(s, idx, idx, 2 * n)
            assert abs(l2_norm(v, s.nu) ** 2 - r2n) <= 1e-12 * (1 + r2n)
            assert r2n - rho_n_form(s, idx, idx, 2 * n + 1) >= -1e-12
