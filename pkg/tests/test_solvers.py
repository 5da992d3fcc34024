import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hierarchy_lab.combinatorics import ClusterTuple
from hierarchy_lab.cumulants import cumulant
from hierarchy_lab.dynamics import OBSERVABLE
from hierarchy_lab.numerics import max_abs
from hierarchy_lab.sequence_algebra import (
    GradedSequence,
    PreconditionError,
    check_symmetry,
    exp_star,
    graded_partition_sum,
    ln_star,
    mean_value_pairing,
)
from hierarchy_lab.solvers import (
    Chaos,
    ClosedSystem,
    Explicit,
    GrandCanonical,
    TruncationSpec,
    grand_canonical_marginals,
    grand_canonical_marginals_by_order,
    marginal_correlations_from_correlations,
    marginal_observables_init,
    marginals_from_correlations,
    normalizer,
    observables_from_marginal,
    solution_sequence,
    solve_correlations,
    solve_marginal_correlations,
    solve_marginal_distributions,
    solve_marginal_observables,
    solve_marginals_reduced,
)
from hierarchy_lab.verification import evolve_sequence, oracle_closed_system


def positive_seq(sp, rng, n_max, head=1.0, scale=0.4):
    comps = [sp.constant(0, head)] + [np.abs(sp.random_symmetric(n, rng, scale)) + 0.05 for n in range(1, n_max + 1)]
    return GradedSequence(sp, tuple(comps), closed=True)


def closed(sp, rng, N):
    return ClosedSystem(N, np.abs(sp.random_symmetric(N, rng)) + 0.05)


# -- initial data -------------------------------------------------------------------


def test_closed_system_top_marginal(pair_model, rng):
    sp = pair_model.space
    init = closed(sp, rng, 4)
    F = grand_canonical_marginals(init.sequence(sp))
    Z = sp.integrate_all(init.D_N) / math.factorial(4)
    np.testing.assert_allclose(F.components[4], init.D_N / Z)
    assert F.scalar() == 1.0


def test_grand_canonical_product_state(pair_model):
    sp = pair_model.space
    rho = np.array([0.7, 0.4])
    z, n_max = 0.6, 8
    F = grand_canonical_marginals(GrandCanonical(z, rho, n_max).sequence(sp))
    c = z * float(sp.integrate_all(rho))
    for s in range(1, 4):
        ratio = sum(c**n / math.factorial(n) for n in range(n_max - s + 1)) / sum(c**n / math.factorial(n) for n in range(n_max + 1))
        expect = sp.product([(z * rho, (i,)) for i in range(s)], s) * ratio
        assert max_abs(F.components[s] - expect) < 1e-14
        # and the untruncated factorized form within the truncation tail
        assert max_abs(F.components[s] - sp.product([(z * rho, (i,)) for i in range(s)], s)) < 1e-3


def test_initial_data_validation(pair_model):
    sp = pair_model.space
    with pytest.raises(ValueError):
        ClosedSystem(2, sp.zeros(3)).sequence(sp)
    with pytest.raises(ValueError):
        GrandCanonical(-1.0, np.ones(2)).sequence(sp)
    with pytest.raises(ValueError):
        Chaos(np.ones((2, 2))).sequence(sp)
    seq = GradedSequence.zeros(sp, 2)
    assert Explicit(seq).sequence() is seq


def test_truncation_flags_closed_systems(pair_model, rng):
    F = grand_canonical_marginals(closed(pair_model.space, rng, 4).sequence(pair_model.space))
    assert TruncationSpec.resolve(F, 1, 3).exact
    assert not TruncationSpec.resolve(F, 1, 2).exact
    assert TruncationSpec.resolve(F, 2, None) == TruncationSpec(2, True)
    with pytest.raises(ValueError):
        TruncationSpec(-1)


# -- marginal distributions ----------------------------------------------------------


@pytest.fixture
def closed_F0(pair_model, rng):
    sp = pair_model.space
    init = closed(sp, rng, 5)
    return init, grand_canonical_marginals(init.sequence(sp))


def test_marginals_at_zero_time(pair_model, closed_F0):
    _, F0 = closed_F0
    for s in range(1, 4):
        assert max_abs(solve_marginal_distributions(F0, s, 0.0, pair_model) - F0.components[s]) < 1e-13


def test_marginals_without_interaction(free_model, closed_F0):
    _, F0 = closed_F0
    for s in range(1, 4):
        expect = free_model.evolve(F0.components[s], 0.8, [tuple(range(s))])
        assert max_abs(solve_marginal_distributions(F0, s, 0.8, free_model) - expect) < 1e-12


@pytest.mark.parametrize("t", [0.3, 1.2])
def test_marginals_match_closed_system_oracle(pair_model, closed_F0, t):
    init, F0 = closed_F0
    for s in range(1, 6):
        assert max_abs(solve_marginal_distributions(F0, s, t, pair_model) - oracle_closed_system(init, s, t, pair_model)) < 1e-10


def test_marginals_match_oracle_three_body(three_body_model, rng):
    sp = three_body_model.space
    init = closed(sp, rng, 5)
    F0 = grand_canonical_marginals(init.sequence(sp))
    for s in (1, 2, 3):
        got = solve_marginal_distributions(F0, s, 0.6, three_body_model)
        assert max_abs(got - oracle_closed_system(init, s, 0.6, three_body_model)) < 1e-10


@given(st.integers(0, 2**31 - 1), st.floats(-1.5, 1.5))
def test_reduced_route_agrees(seed, t):
    from hierarchy_lab.verification import finite_model

    model = finite_model(seed=seed % 7, M=2)
    rng = np.random.default_rng(seed)
    F0 = positive_seq(model.space, rng, 5)
    for s in (1, 2, 3):
        a = solve_marginal_distributions(F0, s, t, model)
        b = solve_marginals_reduced(F0, s, t, model)
        assert max_abs(a - b) < 1e-10


def test_reduced_route_leading_term(pair_model, closed_F0):
    _, F0 = closed_F0
    got = solve_marginals_reduced(F0, 2, 0.5, pair_model, n_term=0)
    np.testing.assert_allclose(got, pair_model.evolve(F0.components[2], 0.5, [(0, 1)]), atol=1e-14)
    assert max_abs(solve_marginals_reduced(F0, 2, 0.0, pair_model) - F0.components[2]) < 1e-13


def test_closed_system_exactness(pair_model, closed_F0):
    _, F0 = closed_F0
    for s in (1, 2, 3):
        exact = solve_marginal_distributions(F0, s, 0.7, pair_model, n_term=5 - s)
        longer = solve_marginal_distributions(F0, s, 0.7, pair_model, n_term=5 - s + 2)
        assert max_abs(longer - exact) <= 1e-14


def test_normalization_is_kept(pair_model, closed_F0):
    _, F0 = closed_F0
    F = solution_sequence(solve_marginal_distributions, 3, 1.0, pair_model.space, F0, 0.9, pair_model)
    assert F.scalar() == 1.0
    assert check_symmetry(F, np.random.default_rng(0)) < 1e-10


# -- correlations --------------------------------------------------------------------


def test_first_correlation_is_free_flow(pair_model, rng):
    sp = pair_model.space
    g0 = ln_star(positive_seq(sp, rng, 3))
    np.testing.assert_allclose(solve_correlations(g0, 1, 0.6, pair_model), pair_model.evolve(g0.components[1], 0.6, [(0,)]), atol=1e-14)


def test_uncorrelated_free_dynamics_stays_uncorrelated(free_model, rng):
    sp = free_model.space
    g0 = GradedSequence(sp, (sp.zeros(0), sp.random_symmetric(1, rng)), closed=True)
    for s in (2, 3, 4):
        assert max_abs(solve_correlations(g0, s, 1.0, free_model)) < 1e-12


def test_correlations_need_zero_scalar(pair_model, rng):
    with pytest.raises(PreconditionError):
        solve_correlations(positive_seq(pair_model.space, rng, 2), 1, 0.1, pair_model)


@given(st.integers(0, 2**31 - 1))
def test_exp_of_correlations_is_evolved_state(seed):
    from hierarchy_lab.verification import finite_model

    model = finite_model(seed=2, M=2)
    sp = model.space
    D = positive_seq(sp, np.random.default_rng(seed), 4)
    g0 = ln_star(D)
    gt = GradedSequence(sp, (sp.zeros(0),) + tuple(solve_correlations(g0, s, 0.8, model) for s in range(1, 5)))
    Dt = evolve_sequence(D, 0.8, model)
    got = exp_star(gt)
    assert max(max_abs(a - b) for a, b in zip(got.components, Dt.components)) < 1e-10


def test_marginals_from_uncorrelated_data(pair_model, rng):
    sp = pair_model.space
    g1 = sp.random_symmetric(1, rng)
    g0 = GradedSequence(sp, (sp.zeros(0), g1), closed=True)
    np.testing.assert_allclose(marginals_from_correlations(g0, 1, n_term=3), g1)
    G = [marginal_correlations_from_correlations(g0, s, n_term=2) for s in (1, 2, 3)]
    np.testing.assert_allclose(G[0], g1)
    assert max_abs(G[1]) == 0 and max_abs(G[2]) == 0


@pytest.mark.parametrize("s", [1, 2, 3])
def test_correlation_route_matches_distribution_route(pair_model, rng, s):
    sp = pair_model.space
    t, order = 0.7, 2
    D = positive_seq(sp, rng, s + order)
    g0 = ln_star(D)
    Dt = evolve_sequence(D, t, pair_model)
    expect = grand_canonical_marginals_by_order(Dt, s, order)
    got = marginals_from_correlations(g0, s, t, pair_model, n_term=order, by_order=True)
    assert max(max_abs(a - b) for a, b in zip(expect, got)) < 1e-8


def test_marginal_correlations_are_ln_of_marginals(pair_model, rng):
    sp = pair_model.space
    t, order = 0.7, 2
    D = positive_seq(sp, rng, 3 + order)
    g0 = ln_star(D)
    F = {s: marginals_from_correlations(g0, s, t, pair_model, n_term=order, by_order=True) for s in (1, 2, 3)}
    for s in (1, 2, 3):
        G = marginal_correlations_from_correlations(g0, s, t, pair_model, n_term=order, by_order=True)
        ln = graded_partition_sum(F, s, order, sp, signed=True)
        assert max(max_abs(a - b) for a, b in zip(ln, G)) < 1e-8


def test_order_grading_needs_unit_head(pair_model, rng):
    with pytest.raises(PreconditionError):
        grand_canonical_marginals_by_order(closed(pair_model.space, rng, 3).sequence(pair_model.space), 1, 1)


# -- marginal correlations ----------------------------------------------------------


def test_marginal_correlations_at_zero_time(pair_model, rng):
    sp = pair_model.space
    G0 = GradedSequence(sp, (sp.zeros(0),) + tuple(sp.random_symmetric(n, rng, 0.3) for n in range(1, 6)))
    for s in (1, 2, 3):
        got = solve_marginal_correlations(G0, s, 0.0, pair_model, n_term=2)
        assert max_abs(got - G0.components[s]) < 1e-13


@pytest.mark.parametrize("s", [1, 2, 3])
def test_exp_of_marginal_correlations_is_marginals(pair_model, rng, s):
    sp = pair_model.space
    t, order = 0.6, 2
    G0 = GradedSequence(sp, (sp.zeros(0),) + tuple(sp.random_symmetric(n, rng, 0.3) for n in range(1, s + order + 2)))
    F0 = exp_star(G0)
    G = {m: solve_marginal_correlations(G0, m, t, pair_model, n_term=order, by_order=True) for m in range(1, s + 1)}
    F = solve_marginal_distributions(F0, s, t, pair_model, n_term=order, by_order=True)
    ex = graded_partition_sum(G, s, order, sp)
    assert max(max_abs(a - b) for a, b in zip(ex, F)) < 1e-8


# -- marginal observables -----------------------------------------------------------


def test_observable_init_examples(pair_model, rng):
    sp = pair_model.space
    A = GradedSequence(sp, (sp.constant(0, 0.4), sp.random_symmetric(1, rng), sp.random_symmetric(2, rng)))
    B = marginal_observables_init(A)
    np.testing.assert_allclose(B.components[1], A.components[1] - 0.4)
    back = observables_from_marginal(B)
    assert max(max_abs(a - b) for a, b in zip(back.components, A.components)) < 1e-12


@pytest.mark.parametrize("s", [1, 2, 3, 4])
def test_additive_observables(pair_model, rng, s):
    sp = pair_model.space
    a1 = sp.random_symmetric(1, rng)
    B = GradedSequence(sp, (sp.zeros(0), a1), closed=True)
    total = sum(sp.product([(a1, (i,))], s) for i in range(s))
    expect = cumulant(ClusterTuple.atoms(range(s)), 0.9, OBSERVABLE).apply(total, pair_model)
    assert max_abs(solve_marginal_observables(B, s, 0.9, pair_model) - expect) < 1e-12


def test_observables_at_zero_time(pair_model, rng):
    sp = pair_model.space
    B = marginal_observables_init(GradedSequence(sp, (sp.constant(0, 0.2),) + tuple(sp.random_symmetric(n, rng) for n in (1, 2, 3))))
    for s in (0, 1, 2, 3):
        assert max_abs(np.asarray(solve_marginal_observables(B, s, 0.0, pair_model)) - B.components[s]) < 1e-13


def test_observable_reduced_route(pair_model, rng):
    sp = pair_model.space
    B = marginal_observables_init(GradedSequence(sp, (sp.constant(0, 0.2),) + tuple(sp.random_symmetric(n, rng) for n in (1, 2, 3))))
    for s in (1, 2, 3):
        a = solve_marginal_observables(B, s, 0.7, pair_model)
        b = solve_marginal_observables(B, s, 0.7, pair_model, reduced=True)
        assert max_abs(a - b) < 1e-10


def test_duality(pair_model, rng):
    sp = pair_model.space
    N, t = 3, 0.8
    F0 = grand_canonical_marginals(closed(sp, rng, N).sequence(sp))
    A0 = GradedSequence(sp, (sp.constant(0, 0.3),) + tuple(sp.random_symmetric(n, rng) for n in range(1, N + 1)))
    B0 = marginal_observables_init(A0)
    Bt = GradedSequence(sp, (B0.components[0],) + tuple(solve_marginal_observables(B0, s, t, pair_model) for s in range(1, N + 1)))
    Ft = solution_sequence(solve_marginal_distributions, N, 1.0, sp, F0, t, pair_model)
    assert abs(mean_value_pairing(Bt, F0) - mean_value_pairing(B0, Ft)) < 1e-8


def test_normalizer(pair_model, rng):
    sp = pair_model.space
    D = positive_seq(sp, rng, 3)
    expect = sum(sp.integrate_all(c) / math.factorial(n) for n, c in enumerate(D.components))
    assert normalizer(D) == pytest.approx(expect, rel=1e-14)
