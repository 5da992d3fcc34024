"""Set partitions, cluster tuples and the signed coefficients of cumulants.

A ground set is a :class:`ClusterTuple`: an ordered tuple of elements, each
either a single particle label (:class:`Atom`) or a group of labels that is
kept together as one indivisible element (:class:`Cluster`).  Partitions never
split a cluster; flows act on the flattened (declusterized) labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterator, Sequence, TypeVar, Union

__all__ = [
    "K_MAX",
    "ResourceLimitError",
    "InvariantViolation",
    "Atom",
    "Cluster",
    "ClusterTuple",
    "Partition",
    "growth_strings",
    "set_partitions",
    "enumerate_partitions",
    "mobius_coefficient",
    "alternating_partition_sum",
    "declusterize",
    "subsets",
    "weak_compositions",
    "multinomial",
]

K_MAX = 10

T = TypeVar("T")


class ResourceLimitError(RuntimeError):
    """A requested enumeration or table exceeds a configured size limit."""


class InvariantViolation(ValueError):
    """A structural invariant (distinct labels, nonempty cluster, ...) is broken."""


@dataclass(frozen=True, order=True)
class Atom:
    label: int

    @property
    def labels(self) -> tuple[int, ...]:
        return (self.label,)

    def __str__(self) -> str:
        return f"x{self.label}"


@dataclass(frozen=True, order=True)
class Cluster:
    """An indivisible group of particle labels, written ``{Y}``."""

    members: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise InvariantViolation("cluster payload must be nonempty")
        members = tuple(sorted(self.members))
        if len(set(members)) != len(members):
            raise InvariantViolation(f"duplicate label in cluster {self.members}")
        object.__setattr__(self, "members", members)

    @property
    def labels(self) -> tuple[int, ...]:
        return self.members

    def __str__(self) -> str:
        return "{" + ",".join(f"x{i}" for i in self.members) + "}"


ClusterElement = Union[Atom, Cluster]


@dataclass(frozen=True)
class ClusterTuple:
    elements: tuple[ClusterElement, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", tuple(self.elements))
        declusterize(self)

    @classmethod
    def atoms(cls, labels: Sequence[int]) -> "ClusterTuple":
        return cls(tuple(Atom(i) for i in labels))

    @classmethod
    def with_cluster(cls, s: int, n: int) -> "ClusterTuple":
        """The ground ``({Y}, x_{s+1}, ..., x_{s+n})`` with ``Y = (x_1..x_s)``.

        Labels are zero based: the cluster holds ``0..s-1``.
        """
        if s < 1:
            raise InvariantViolation("cluster part needs s >= 1")
        head: ClusterElement = Cluster(tuple(range(s))) if s > 1 else Atom(0)
        return cls((head,) + tuple(Atom(s + i) for i in range(n)))

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __str__(self) -> str:
        return "(" + ", ".join(str(e) for e in self.elements) + ")"


@dataclass(frozen=True)
class Partition:
    blocks: tuple[tuple[ClusterElement, ...], ...]

    def __len__(self) -> int:
        return len(self.blocks)

    def flat_blocks(self) -> tuple[tuple[int, ...], ...]:
        """Declusterized label sets of the blocks."""
        return tuple(_flatten(b) for b in self.blocks)


def _flatten(elements: Sequence[ClusterElement]) -> tuple[int, ...]:
    out: list[int] = []
    for e in elements:
        out.extend(e.labels)
    return tuple(sorted(out))


@lru_cache(maxsize=None)
def growth_strings(k: int) -> tuple[tuple[int, ...], ...]:
    """Restricted growth strings of length ``k`` in lexicographic order."""
    if k == 0:
        return ((),)
    out = []
    a = [0] * k
    m = [0] * k  # m[i] = max(a[0..i])
    while True:
        out.append(tuple(a))
        # rightmost position that can still grow
        i = k - 1
        while i > 0 and a[i] == m[i - 1] + 1:
            i -= 1
        if i == 0:
            break
        a[i] += 1
        m[i] = max(m[i - 1], a[i])
        for j in range(i + 1, k):
            a[j] = 0
            m[j] = m[i]
    return tuple(out)


def set_partitions(items: Sequence[T], k_max: int = K_MAX) -> Iterator[tuple[tuple[T, ...], ...]]:
    """Yield every partition of ``items`` once, blocks ordered by first member."""
    k = len(items)
    if k > k_max:
        raise ResourceLimitError(f"ground of {k} elements exceeds K_max={k_max}")
    for rgs in growth_strings(k):
        nblocks = (max(rgs) + 1) if rgs else 0
        blocks: list[list[T]] = [[] for _ in range(nblocks)]
        for item, b in zip(items, rgs):
            blocks[b].append(item)
        yield tuple(tuple(b) for b in blocks)


def enumerate_partitions(ground: ClusterTuple, k_max: int = K_MAX) -> list[Partition]:
    """All partitions of a cluster tuple; the count is the Bell number of its size."""
    return [Partition(blocks) for blocks in set_partitions(ground.elements, k_max)]


def mobius_coefficient(p: Partition | int) -> int:
    """``(-1)**(|P|-1) * (|P|-1)!`` for a partition, or for a block count."""
    k = p if isinstance(p, int) else len(p)
    if k < 1:
        raise ValueError("a partition has at least one block")
    return (-1) ** (k - 1) * math.factorial(k - 1)


def alternating_partition_sum(k: int, k_max: int = K_MAX) -> int:
    """``sum over partitions P of a k-set of (-1)**|P| * |P|!``, by enumeration.

    The empty set has a single (empty) partition, contributing 1.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    total = 0
    for blocks in set_partitions(range(k), k_max):
        total += (-1) ** len(blocks) * math.factorial(len(blocks))
    return total


def declusterize(t: ClusterTuple) -> tuple[int, ...]:
    labels = _flatten(t.elements)
    if len(set(labels)) != len(labels):
        raise InvariantViolation(f"duplicate label in cluster tuple {t.elements!r}")
    return labels


def subsets(items: Sequence[T], min_size: int = 0) -> Iterator[tuple[T, ...]]:
    """All subsets (as order-preserving tuples), smallest first."""
    for r in range(min_size, len(items) + 1):
        yield from combinations(items, r)


def weak_compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Ordered tuples of ``parts`` nonnegative integers summing to ``total``."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in weak_compositions(total - first, parts - 1):
            yield (first,) + rest


def multinomial(counts: Sequence[int]) -> int:
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out
