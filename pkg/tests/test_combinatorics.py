import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hierarchy_lab.combinatorics import (
    Atom,
    Cluster,
    ClusterTuple,
    InvariantViolation,
    ResourceLimitError,
    alternating_partition_sum,
    declusterize,
    enumerate_partitions,
    growth_strings,
    mobius_coefficient,
    multinomial,
    set_partitions,
    subsets,
    weak_compositions,
)


def bell_triangle(k):
    """Bell numbers from the Aitken triangle, independent of the enumerator."""
    row = [1]
    bells = [1]
    for _ in range(k):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
        bells.append(row[0])
    return bells


def brute_partitions(items):
    """Every partition, by assigning labels and deduplicating."""
    seen = set()
    n = len(items)
    for labels in itertools.product(range(n), repeat=n):
        blocks = {}
        for item, lab in zip(items, labels):
            blocks.setdefault(lab, []).append(item)
        seen.add(frozenset(frozenset(b) for b in blocks.values()))
    return seen


@pytest.mark.parametrize("k", range(0, 9))
def test_partition_counts_match_bell_numbers(k):
    assert len(list(set_partitions(tuple(range(k))))) == bell_triangle(8)[k]


@pytest.mark.parametrize("k", range(1, 6))
def test_partitions_match_brute_force(k):
    ours = {frozenset(frozenset(b) for b in p) for p in set_partitions(tuple(range(k)))}
    assert ours == brute_partitions(tuple(range(k)))


def test_ground_examples():
    assert len(enumerate_partitions(ClusterTuple.atoms([0]))) == 1
    assert len(enumerate_partitions(ClusterTuple.atoms(range(3)))) == 5
    assert len(enumerate_partitions(ClusterTuple.atoms(range(4)))) == 15


def test_clusters_are_never_split():
    ground = ClusterTuple((Cluster((0, 1)), Atom(2)))
    parts = enumerate_partitions(ground)
    assert len(parts) == 2
    for p in parts:
        for block in p.blocks:
            assert all(isinstance(e, (Atom, Cluster)) for e in block)
    assert {p.flat_blocks() for p in parts} == {((0, 1, 2),), ((0, 1), (2,))}


def test_mobius_examples():
    assert mobius_coefficient(1) == 1
    assert mobius_coefficient(2) == -1
    assert mobius_coefficient(4) == -6


@pytest.mark.parametrize("k", range(1, 8))
def test_mobius_formula(k):
    assert mobius_coefficient(k) == (-1) ** (k - 1) * math.factorial(k - 1)


def test_alternating_sum_examples():
    assert alternating_partition_sum(0) == 1
    assert alternating_partition_sum(2) == 1
    assert alternating_partition_sum(3) == -1


@pytest.mark.parametrize("k", range(0, 9))
def test_alternating_sum_identity(k):
    assert alternating_partition_sum(k) == (-1) ** k


def test_declusterize_examples():
    assert declusterize(ClusterTuple((Cluster((1, 2)), Atom(3)))) == (1, 2, 3)
    assert declusterize(ClusterTuple((Atom(1),))) == (1,)
    assert declusterize(ClusterTuple((Cluster((1, 2, 3)),))) == (1, 2, 3)


def test_invariants_rejected():
    with pytest.raises(InvariantViolation):
        ClusterTuple((Atom(0), Atom(0)))
    with pytest.raises(InvariantViolation):
        ClusterTuple((Cluster((0, 1)), Atom(1)))
    with pytest.raises(InvariantViolation):
        Cluster(())


def test_resource_limit():
    with pytest.raises(ResourceLimitError):
        list(set_partitions(tuple(range(5)), k_max=4))


def test_growth_strings_are_lexicographic_and_restricted():
    gs = growth_strings(4)
    assert list(gs) == sorted(gs)
    for g in gs:
        assert g[0] == 0
        assert all(g[i] <= max(g[:i]) + 1 for i in range(1, len(g)))


def test_enumeration_order_is_deterministic():
    a = [p.flat_blocks() for p in enumerate_partitions(ClusterTuple.with_cluster(2, 3))]
    b = [p.flat_blocks() for p in enumerate_partitions(ClusterTuple.with_cluster(2, 3))]
    assert a == b


@given(st.integers(0, 7), st.integers(1, 4))
def test_weak_compositions_count(total, parts):
    comps = list(weak_compositions(total, parts))
    assert len(comps) == math.comb(total + parts - 1, parts - 1)
    assert all(sum(c) == total and len(c) == parts for c in comps)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=4))
def test_multinomial(counts):
    expect = math.factorial(sum(counts))
    for c in counts:
        expect //= math.factorial(c)
    assert multinomial(counts) == expect


@given(st.integers(0, 6))
def test_subset_count(n):
    assert len(list(subsets(tuple(range(n))))) == 2**n


@given(st.integers(1, 6), st.lists(st.integers(-9, 9), min_size=6, max_size=6))
def test_mobius_inverts_cluster_sum(k, x):
    # h_B = sum over partitions R of B of prod_r x_|r| is the cluster sum of
    # indeterminates x; the Mobius-weighted partition sum of h gives back x_k
    def h(block):
        return sum(math.prod(x[len(r) - 1] for r in R) for R in set_partitions(block))

    total = sum(mobius_coefficient(len(P)) * math.prod(h(b) for b in P) for P in set_partitions(tuple(range(k))))
    assert total == x[k - 1]
