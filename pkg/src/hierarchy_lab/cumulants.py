"""Cumulants of groups of evolution operators and their cluster expansions.

A cumulant over a ground tuple ``(X_1, ..., X_k)`` of clusters is

    A_k = sum_P c(P) prod_{blocks B of P} S_{|theta(B)|}(theta(B)),

with ``c(P) = (-1)^{|P|-1} (|P|-1)!``.  It is stored as an explicit list of
terms and applied term by term; on the finite model it can also be
materialized as a dense matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .combinatorics import (
    Atom,
    Cluster,
    ClusterTuple,
    Partition,
    declusterize,
    enumerate_partitions,
    mobius_coefficient,
    multinomial,
    set_partitions,
    subsets,
    weak_compositions,
)
from .dynamics import OBSERVABLE, STATE
from .numerics import compensated_sum, max_abs
from .reports import ResidualReport
from .sequence_algebra import GradedSequence, MissingComponentError

__all__ = [
    "CoefficientRule",
    "perturbed_mobius",
    "CumulantTerm",
    "CumulantOperator",
    "cumulant",
    "cumulant_on_clusters",
    "cluster_ground",
    "reduced_cumulant",
    "nonlinear_reduced_cumulant",
    "apply_product",
    "dense_product",
    "verify_cluster_expansion",
    "verify_dual_recurrence",
]

CoefficientRule = Callable[[Partition], float]


def perturbed_mobius(blocks: int, eps: float = 1e-3) -> CoefficientRule:
    """Mobius coefficients with the one for ``|P| = blocks`` shifted by ``eps``."""

    def rule(p: Partition) -> float:
        c = mobius_coefficient(p)
        return c + eps if len(p) == blocks else c

    return rule


@dataclass(frozen=True)
class CumulantTerm:
    coefficient: float
    partition: Partition | None
    blocks: tuple[tuple[int, ...], ...]

    def to_dict(self) -> dict:
        blocks = self.partition.blocks if self.partition is not None else self.blocks
        return {
            "coefficient": self.coefficient,
            "blocks": [[str(e) for e in b] for b in blocks],
            "block_sizes": [len(b) for b in self.blocks],
        }


@dataclass(frozen=True)
class CumulantOperator:
    """``A_{|ground|}(-/+t, ground)`` as a term list."""

    ground: ClusterTuple
    t: float
    direction: str
    terms: tuple[CumulantTerm, ...]

    @property
    def order(self) -> int:
        return len(self.ground)

    @property
    def labels(self) -> tuple[int, ...]:
        return declusterize(self.ground)

    def apply(self, f, model, derivative: bool = False):
        """Apply to a function whose arguments include every label of the ground."""
        sp = model.space
        n = sp.arity(f)
        op = model.evolve_derivative if derivative else model.evolve
        values = [op(f, self.t, term.blocks, self.direction) for term in self.terms]
        return sp.linear_combination([term.coefficient for term in self.terms], values, n)

    def dense(self, model, n: int | None = None) -> np.ndarray:
        """Matrix on row-major ``M^n`` vectors (finite model only)."""
        n = max(self.labels) + 1 if n is None else n
        return dense_product([self], model, n)

    def to_dict(self) -> dict:
        return {
            "ground": str(self.ground),
            "order": self.order,
            "direction": self.direction,
            "terms": [term.to_dict() for term in self.terms],
        }


def cumulant(
    ground: ClusterTuple,
    t: float,
    direction: str = STATE,
    coefficients: CoefficientRule | None = None,
) -> CumulantOperator:
    """Signed partition sum of products of block flows over a cluster tuple."""
    rule = coefficients or mobius_coefficient
    terms = tuple(CumulantTerm(float(rule(P)), P, P.flat_blocks()) for P in enumerate_partitions(ground))
    return CumulantOperator(ground, t, direction, terms)


def cluster_ground(blocks: Sequence[Sequence[int]]) -> ClusterTuple:
    """The tuple ``({X_1}, ..., {X_k})``; singleton groups become atoms."""
    elems = []
    for b in blocks:
        b = tuple(b)
        elems.append(Atom(b[0]) if len(b) == 1 else Cluster(b))
    return ClusterTuple(tuple(elems))


def cumulant_on_clusters(
    blocks: Sequence[Sequence[int]],
    t: float,
    direction: str = STATE,
    coefficients: CoefficientRule | None = None,
) -> CumulantOperator:
    """``A_{|P|}(-t, {X_1}, ..., {X_|P|})`` with each group kept whole."""
    return cumulant(cluster_ground(blocks), t, direction, coefficients)


def reduced_cumulant(s: int, n: int, t: float, direction: str = STATE) -> CumulantOperator:
    """``U_{1+n} = sum_k (-1)^k C(n,k) S_{s+n-k}`` on the first ``s+n-k`` positions.

    ``s`` is the size of the cluster.  For states it acts on ``F_{s+n}`` before
    the added variables are integrated; for observables it acts on a function
    of the cluster variables only, which are positions ``0..s-1``.
    """
    if s < 1 or n < 0:
        raise ValueError("need s >= 1 and n >= 0")
    ground = ClusterTuple.with_cluster(s, n)
    terms = []
    for k in range(n + 1):
        block = tuple(range(s + n - k))
        terms.append(CumulantTerm(float((-1) ** k * math.comb(n, k)), None, (block,)))
    return CumulantOperator(ground, t, direction, tuple(terms))


def apply_product(ops: Sequence[CumulantOperator], f, model, derivative: bool = False):
    """``prod_i ops[i] f`` for operators acting on disjoint labels.

    With ``derivative`` the product rule is applied: one factor at a time is
    replaced by its time derivative.
    """
    if not derivative:
        out = f
        for op in ops:
            out = op.apply(out, model)
        return out
    sp = model.space
    n = sp.arity(f)
    pieces = []
    for i in range(len(ops)):
        out = f
        for j, op in enumerate(ops):
            out = op.apply(out, model, derivative=(i == j))
        pieces.append(out)
    return sp.linear_combination([1.0] * len(pieces), pieces, n)


def dense_product(ops: Sequence[CumulantOperator], model, n: int) -> np.ndarray:
    """Dense matrix of ``prod_i ops[i]`` on ``n`` finite-model sites."""
    M = model.space.M
    size = M**n
    out = np.eye(size).reshape((M,) * n + (size,))
    for op in ops:
        vals = [model.evolve(out, op.t, term.blocks, op.direction) for term in op.terms]
        out = compensated_sum(c * v for c, v in zip((term.coefficient for term in op.terms), vals))
    return np.asarray(out).reshape(size, size)


# ---------------------------------------------------------------------------
# Nonlinear reduced cumulants
# ---------------------------------------------------------------------------


def _component(G0: GradedSequence, m: int):
    try:
        return G0.component(m)
    except MissingComponentError as exc:
        raise MissingComponentError(f"initial sequence lacks component G_{m}: {exc}") from None


def nonlinear_reduced_cumulant(
    s: int,
    n: int,
    t: float,
    G0: GradedSequence,
    model,
    coefficients: CoefficientRule | None = None,
    derivative: bool = False,
):
    """``U_{1+n}(t; {Y}, x_{s+1}..x_{s+n} | G(0))`` as a function of ``s+n`` variables.

    Outer alternating binomial sum over the number ``k`` of reservoir variables
    ``x_{s+n-k+1}..x_{s+n}``; inner sum over partitions ``P`` of the remaining
    ``s+n-k`` variables with the cluster cumulant ``A_{|P|}(-t, {X_1}..)``;
    innermost sum over the ways to hand the reservoir variables to the blocks
    (in canonical block order), weighted by the nested binomials.
    """
    sp = model.space
    total = s + n
    terms, coeffs = [], []
    for k in range(n + 1):
        active = tuple(range(total - k))
        outer = (-1) ** k * math.comb(n, k)
        for blocks in set_partitions(active):
            op = cumulant_on_clusters(blocks, t, STATE, coefficients)
            for counts in weak_compositions(k, len(blocks)):
                factors = []
                zero = False
                nxt = total - k
                for block, c in zip(blocks, counts):
                    args = tuple(block) + tuple(range(nxt, nxt + c))
                    nxt += c
                    comp = _component(G0, len(args))
                    if sp.is_zero(comp):
                        zero = True
                        break
                    factors.append((comp, args))
                if zero:
                    continue
                prod = sp.product(factors, total)
                terms.append(op.apply(prod, model, derivative))
                coeffs.append(outer * multinomial(counts))
    return sp.linear_combination(coeffs, terms, total)


# ---------------------------------------------------------------------------
# Cluster-expansion checks
# ---------------------------------------------------------------------------


def _block_cumulants(P: Partition, t: float, direction: str, coefficients) -> list[CumulantOperator]:
    return [cumulant(ClusterTuple(block), t, direction, coefficients) for block in P.blocks]


def verify_cluster_expansion(
    s: int,
    n: int,
    t: float,
    model,
    direction: str = STATE,
    coefficients: CoefficientRule | None = None,
    tolerance: float = 1e-10,
) -> ResidualReport:
    """Rebuild ``S_{s+n}`` on ``({Y}, x_{s+1}..x_{s+n})`` from the partition products of cumulants.

    On the finite model the comparison is between dense matrices; otherwise it
    is done on sampled points of a random product test function.
    """
    ground = ClusterTuple.with_cluster(s, n)
    size = s + n
    if model.kind == "finite":
        target = dense_product([_single_flow(size, t, direction)], model, size)
        pieces = [dense_product(_block_cumulants(P, t, direction, coefficients), model, size) for P in enumerate_partitions(ground)]
        rebuilt = compensated_sum(pieces)
        residual = max_abs(rebuilt - target)
    else:
        residual = _continuous_expansion_residual(ground, t, model, direction, coefficients)
    return ResidualReport(
        "cluster_expansion",
        residual,
        tolerance,
        {"s": s, "n": n, "t": t, "direction": direction},
        {"model": model.kind},
    )


def _single_flow(size: int, t: float, direction: str) -> CumulantOperator:
    ground = ClusterTuple.atoms(range(size))
    P = Partition((tuple(ground.elements),))
    return CumulantOperator(ground, t, direction, (CumulantTerm(1.0, P, (tuple(range(size)),)),))


def _continuous_expansion_residual(ground, t, model, direction, coefficients, samples: int = 16) -> float:
    from .spaces import PhaseFunction

    sp = model.space
    size = len(declusterize(ground))
    rng = np.random.default_rng(0)
    centers = rng.standard_normal((size, sp.dim))
    f = PhaseFunction(size, lambda X: np.exp(-0.5 * np.sum((X - centers) ** 2, axis=(-1, -2))), "gauss")
    target = model.evolve(f, t, [tuple(range(size))], direction)
    pieces = [apply_product(_block_cumulants(P, t, direction, coefficients), f, model) for P in enumerate_partitions(ground)]
    rebuilt = sp.linear_combination([1.0] * len(pieces), pieces, size)
    X = sp.random_points(size, samples, rng)
    return max_abs(rebuilt(X) - target(X))


def verify_dual_recurrence(
    s: int,
    n: int,
    t: float,
    model,
    coefficients: CoefficientRule | None = None,
    tolerance: float = 1e-10,
    rng: np.random.Generator | None = None,
) -> ResidualReport:
    """Check ``(-1)^n S_{s-n}(t, Y minus X) = sum_k (-1)^{n-k} sum_{I subset X, |I|=k} A_{1+k}(t, {Y minus I}, I)``.

    Both sides act on a random function ``b(Y minus X)`` of the surviving
    variables, with ``X`` the last ``n`` of the ``s`` positions.
    """
    if not 0 <= n < s:
        raise ValueError("need 0 <= n < s")
    sp = model.space
    rng = rng or np.random.default_rng(0)
    keep = tuple(range(s - n))
    X = tuple(range(s - n, s))
    if model.kind == "finite":
        b = sp.embed(sp.random_symmetric(s - n, rng), keep, s) + np.zeros((sp.M,) * s)
    else:
        from .spaces import PhaseFunction

        c = rng.standard_normal((s - n, sp.dim))
        b0 = PhaseFunction(s - n, lambda Z: np.exp(-0.5 * np.sum((Z - c) ** 2, axis=(-1, -2))), "b")
        b = sp.embed(b0, keep, s)
    lhs = sp.linear_combination([(-1.0) ** n], [model.evolve(b, t, [keep], OBSERVABLE)], s)
    coeffs, terms = [], []
    for I in subsets(X):
        rest = tuple(i for i in range(s) if i not in I)
        ground = ClusterTuple((Cluster(rest) if len(rest) > 1 else Atom(rest[0]),) + tuple(Atom(i) for i in I))
        coeffs.append((-1.0) ** (n - len(I)))
        terms.append(cumulant(ground, t, OBSERVABLE, coefficients).apply(b, model))
    rhs = sp.linear_combination(coeffs, terms, s)
    if model.kind == "finite":
        residual = max_abs(rhs - lhs)
    else:
        pts = sp.random_points(s, 16, rng)
        residual = max_abs(rhs(pts) - lhs(pts))
    return ResidualReport("dual_recurrence", residual, tolerance, {"s": s, "n": n, "t": t}, {"model": model.kind})
