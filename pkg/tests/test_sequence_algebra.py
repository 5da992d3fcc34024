import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hierarchy_lab.numerics import max_abs
from hierarchy_lab.sequence_algebra import (
    GradedSequence,
    MissingComponentError,
    annihilate,
    check_symmetry,
    create,
    exp_annihilate,
    exp_create,
    exp_create_neg,
    exp_star,
    from_json,
    functional_derivative,
    generating_functional,
    generating_functional_terms,
    identity_sequence,
    ln_star,
    mean_value_pairing,
    star_product,
    to_json,
)
from hierarchy_lab.spaces import ContinuousPhase, FinitePhase, PhaseFunction

SP = FinitePhase(2, [0.6, 1.3])
SP3 = FinitePhase(3, [0.5, 1.0, 1.5])


def rand_seq(sp, rng, n_max, head=0.0, scale=0.5, closed=True):
    comps = [sp.constant(0, head)] + [sp.random_symmetric(n, rng, scale) for n in range(1, n_max + 1)]
    return GradedSequence(sp, tuple(comps), closed=closed)


def seeds():
    return st.integers(0, 2**31 - 1)


def close(a, b):
    return max(max_abs(x - y) for x, y in zip(a.components, b.components))


# -- state spaces -------------------------------------------------------------


def test_integrate_counting_measure():
    sp = FinitePhase(2)
    f2 = sp.constant(2, 1.0)
    np.testing.assert_array_equal(sp.integrate_last(f2, 1), np.full(2, 2.0))
    np.testing.assert_array_equal(sp.integrate_last(f2, 0), f2)


def test_gaussian_normalization_by_quadrature():
    sp = ContinuousPhase(d=1, nodes=20)
    f = PhaseFunction(1, lambda X: np.exp(-0.5 * np.sum((X - np.array([0.3, -0.2])) ** 2, axis=(-1, -2))))
    assert abs(sp.integrate_all(f) - 2 * math.pi) < 1e-10


def test_two_particle_quadrature_factorizes():
    sp = ContinuousPhase(d=1, nodes=12)
    f = PhaseFunction(2, lambda X: np.exp(-0.5 * np.sum(X**2, axis=(-1, -2)) - 0.1 * (X[..., 0, 0] - X[..., 1, 0]) ** 2))
    # positions carry the quadratic form A, momenta the identity
    A = np.array([[1.2, -0.2], [-0.2, 1.2]])
    exact = (2 * math.pi) ** 2 / math.sqrt(np.linalg.det(A))
    assert abs(sp.integrate_all(f) - exact) / exact < 1e-10


# -- star product ----------------------------------------------------------------


def test_star_low_components(rng):
    f = rand_seq(SP, rng, 2, head=0.7)
    g = rand_seq(SP, rng, 2, head=-0.4)
    h = star_product(f, g)
    assert h.scalar() == pytest.approx(0.7 * -0.4)
    np.testing.assert_allclose(h.components[1], 0.7 * g.components[1] + f.components[1] * -0.4)


@given(seeds())
def test_star_homomorphism(seed):
    rng = np.random.default_rng(seed)
    f, g = rand_seq(SP3, rng, 3, 0.5), rand_seq(SP3, rng, 2, -0.3)
    u = rng.standard_normal(3)
    assert abs(generating_functional(star_product(f, g), u) - generating_functional(f, u) * generating_functional(g, u)) < 1e-12


@given(seeds())
def test_star_is_commutative_and_has_unit(seed):
    rng = np.random.default_rng(seed)
    f, g = rand_seq(SP, rng, 3, 0.5), rand_seq(SP, rng, 3, -0.3)
    assert close(star_product(f, g), star_product(g, f)) < 1e-13
    assert close(star_product(f, identity_sequence(SP, 3)), f) < 1e-15


# -- Exp* and Ln* ----------------------------------------------------------------------


def test_exp_of_zero_is_identity():
    e = exp_star(GradedSequence.zeros(SP, 3))
    assert e.scalar() == 1.0
    assert all(not np.any(c) for c in e.components[1:])


def test_exp_of_single_component_is_product(rng):
    a = SP.random_symmetric(1, rng)
    e = exp_star(GradedSequence(SP, (SP.zeros(0), a, SP.zeros(2))))
    np.testing.assert_allclose(e.components[2], np.multiply.outer(a, a))


def test_ln_of_identity_is_zero():
    assert all(not np.any(c) for c in ln_star(identity_sequence(SP, 4)).components)


def test_ln_of_product_state_has_no_pair_part(rng):
    a = SP.random_symmetric(1, rng)
    h = GradedSequence(SP, (SP.constant(0, 1.0), a, np.multiply.outer(a, a)))
    assert max_abs(ln_star(h).components[2]) < 1e-15


@given(seeds())
def test_ln_exp_roundtrip(seed):
    f = rand_seq(SP, np.random.default_rng(seed), 5, 0.0, 0.4)
    assert close(ln_star(exp_star(f)), f) < 1e-12


@given(seeds())
def test_exp_ln_roundtrip(seed):
    h = rand_seq(SP, np.random.default_rng(seed), 5, 1.0, 0.4)
    assert close(exp_star(ln_star(h)), h) < 1e-12


def test_ln_needs_unit_head(rng):
    with pytest.raises(ValueError):
        ln_star(rand_seq(SP, rng, 2, head=0.0))


# -- generating functional ------------------------------------------------------


def test_generating_functional_at_zero(rng):
    f = rand_seq(SP, rng, 4, head=0.37)
    assert generating_functional(f, np.zeros(2)) == 0.37


def test_generating_functional_of_product_matches_exponential_series():
    a = np.array([0.4, -0.9])
    u = np.array([0.8, 0.5])
    n_max = 12
    comps = [SP.constant(0, 1.0)]
    for n in range(1, n_max + 1):
        t = np.ones(())
        for _ in range(n):
            t = np.multiply.outer(t, a)
        comps.append(t)
    f = GradedSequence(SP, tuple(comps))
    c = float(np.sum(SP.weights * a * u))
    partial = math.fsum(c**n / math.factorial(n) for n in range(n_max + 1))
    assert abs(generating_functional(f, u) - partial) < 1e-12
    assert abs(partial - math.exp(c)) < 1e-12


@given(seeds())
def test_exp_star_functional_is_exponential(seed):
    # (Exp* g, lam u) = exp((g, lam u)) as power series in lam, compared degree by degree
    rng = np.random.default_rng(seed)
    n = 5
    g = GradedSequence(SP, (SP.zeros(0),) + tuple(0.4 * SP.random_symmetric(k, rng) for k in range(1, n + 1)))
    u = rng.standard_normal(2)
    c = generating_functional_terms(g, u)
    e = [1.0] + [0.0] * n
    for k in range(1, n + 1):
        e[k] = sum(j * c[j] * e[k - j] for j in range(1, k + 1)) / k
    got = generating_functional_terms(exp_star(g), u)
    assert max(abs(a - b) for a, b in zip(got, e)) < 1e-12


# -- functional derivative ---------------------------------------------------------


def test_derivative_recovers_component(rng):
    f = rand_seq(SP, rng, 4, 0.2)
    d = f
    for _ in range(3):
        d = functional_derivative(d, 1)
    assert generating_functional(d, np.zeros(2)) == pytest.approx(f.components[3][1, 1, 1], abs=1e-15)


def test_derivative_of_constant_sequence():
    f = GradedSequence(SP, tuple(SP.constant(n, float(n + 1)) for n in range(5)))
    d = functional_derivative(f, 0)
    assert [float(np.mean(c)) for c in d.components] == [2.0, 3.0, 4.0, 5.0]


@given(seeds(), st.integers(0, 1))
def test_derivative_matches_finite_difference(seed, x):
    rng = np.random.default_rng(seed)
    f = rand_seq(SP, rng, 4, 0.2)
    u = rng.standard_normal(2) * 0.5
    h = 1e-6
    e = np.eye(2)[x]
    fd = (generating_functional(f, u + h * e) - generating_functional(f, u - h * e)) / (2 * h) / SP.weights[x]
    assert abs(fd - generating_functional(functional_derivative(f, x), u)) < 1e-9


# -- annihilation and creation --------------------------------------------------------


def test_annihilate_examples(rng):
    a = SP.random_symmetric(1, rng)
    f = GradedSequence(SP, (SP.zeros(0), a))
    assert annihilate(f).scalar() == pytest.approx(float(np.dot(SP.weights, a)))
    g = GradedSequence(FinitePhase(2), (np.zeros(()), np.zeros(2), np.ones((2, 2))))
    np.testing.assert_array_equal(annihilate(g).components[1], [2.0, 2.0])


def test_annihilate_closed_system_to_mass(rng):
    sp = FinitePhase(2)
    D = np.abs(sp.random_symmetric(3, rng))
    f = GradedSequence(sp, (sp.zeros(0), sp.zeros(1), sp.zeros(2), D), closed=True)
    for _ in range(3):
        f = annihilate(f)
    assert f.scalar() == pytest.approx(float(D.sum()))


def test_exp_annihilate_examples(rng):
    a = SP.random_symmetric(1, rng)
    f = GradedSequence(SP, (SP.constant(0, 0.3), a), closed=True)
    e = exp_annihilate(f)
    assert e.scalar() == pytest.approx(0.3 + float(np.dot(SP.weights, a)))
    np.testing.assert_array_equal(e.components[1], a)
    assert e.n_max == 1 and e.closed
    assert not np.any(e.component(2))


@given(seeds())
def test_exp_annihilate_shifts_test_function(seed):
    rng = np.random.default_rng(seed)
    f = rand_seq(SP3, rng, 5, 0.6)
    u = rng.standard_normal(3) * 0.4
    assert abs(generating_functional(f, u + 1.0) - generating_functional(exp_annihilate(f), u)) < 1e-12


def test_create_examples(rng):
    b = GradedSequence(SP, (SP.constant(0, 2.5),))
    np.testing.assert_array_equal(create(b).components[1], [2.5, 2.5])
    b1 = SP.random_symmetric(1, rng)
    c = create(GradedSequence(SP, (SP.zeros(0), b1)))
    np.testing.assert_allclose(c.components[2], b1[None, :] + b1[:, None])


@given(seeds())
def test_adjointness(seed):
    rng = np.random.default_rng(seed)
    b = rand_seq(SP3, rng, 4, 0.3)
    d = rand_seq(SP3, rng, 5, 0.9)
    assert abs(mean_value_pairing(create(b), d) - mean_value_pairing(b, annihilate(d))) < 1e-12


def test_exp_create_neg_examples(rng):
    A = rand_seq(SP, rng, 2, 0.8)
    B = exp_create_neg(A)
    A0, A1, A2 = A.components
    np.testing.assert_allclose(B.components[1], A1 - A0)
    np.testing.assert_allclose(B.components[2], A2 - A1[:, None] - A1[None, :] + A0, atol=1e-15)


@given(seeds(), st.integers(1, 6))
def test_exp_create_roundtrip(seed, n_max):
    A = rand_seq(SP, np.random.default_rng(seed), n_max, 0.8)
    assert close(exp_create(exp_create_neg(A)), A) < 1e-12


def test_k_ary_observable_maps_to_single_component(rng):
    a2 = SP.random_symmetric(2, rng)
    # the 2-ary observable sum_{i<j} a2(x_i, x_j) is e^{a+} of (0, 0, a2)
    B = GradedSequence(SP, (SP.zeros(0), SP.zeros(1), a2, SP.zeros(3), SP.zeros(4)))
    A = exp_create(B)
    back = exp_create_neg(A)
    assert max_abs(back.components[2] - a2) < 1e-14
    assert all(max_abs(c) < 1e-14 for n, c in enumerate(back.components) if n != 2)


# -- symmetry and serialization ---------------------------------------------------------


@given(seeds())
def test_operations_preserve_symmetry(seed):
    rng = np.random.default_rng(seed)
    f, g = rand_seq(SP3, rng, 3, 1.0), rand_seq(SP3, rng, 3, 0.0)
    for h in (star_product(f, g), exp_star(g), ln_star(f), exp_annihilate(f), exp_create_neg(g)):
        assert check_symmetry(h, rng) < 1e-12


def test_json_roundtrip(rng):
    f = rand_seq(SP3, rng, 3, 0.4)
    back = from_json(to_json(f))
    assert back.space == SP3 and close(back, f) == 0.0


def test_missing_component_is_an_error(rng):
    f = rand_seq(SP, rng, 2, closed=False)
    with pytest.raises(MissingComponentError):
        f.component(3)
    g = rand_seq(SP, rng, 2, closed=True)
    assert not np.any(g.component(3))


def test_generating_functional_terms_split_by_degree(rng):
    f = rand_seq(SP, rng, 3, 0.5)
    u = rng.standard_normal(2)
    terms = generating_functional_terms(f, 2.0 * u)
    base = generating_functional_terms(f, u)
    for n, (a, b) in enumerate(zip(terms, base)):
        assert a == pytest.approx(2.0**n * b, rel=1e-13, abs=1e-15)
