"""Nonperturbative solution expansions and the relations among D, F, g, G, A, B.

Every solver evaluates its expansion directly at the requested ``t``; nothing
is time stepped.  Series over added particles are cut at ``n_term``.  With
``by_order=True`` a solver returns the list of its series terms instead of
their sum: term ``n`` is homogeneous of degree ``s + n`` in the initial data,
which lets truncated series be compared order by order.  With
``derivative=True`` every evolution operator is replaced by its time
derivative, giving ``d/dt`` of the solution (exact on the finite model).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from .combinatorics import ClusterTuple, enumerate_partitions, set_partitions, subsets
from .cumulants import (
    CoefficientRule,
    cluster_ground,
    cumulant,
    cumulant_on_clusters,
    nonlinear_reduced_cumulant,
    reduced_cumulant,
)
from .dynamics import OBSERVABLE, STATE
from .sequence_algebra import (
    GradedSequence,
    PreconditionError,
    exp_create,
    exp_create_neg,
)

__all__ = [
    "ClosedSystem",
    "GrandCanonical",
    "Chaos",
    "Explicit",
    "TruncationSpec",
    "normalizer",
    "grand_canonical_marginals",
    "grand_canonical_marginals_by_order",
    "solve_marginal_distributions",
    "solve_marginals_reduced",
    "solve_correlations",
    "cluster_correlation",
    "solve_cluster_correlations",
    "marginals_from_correlations",
    "marginal_correlations_from_correlations",
    "solve_marginal_correlations",
    "solve_marginal_observables",
    "marginal_observables_init",
    "observables_from_marginal",
    "solution_sequence",
]


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClosedSystem:
    """``N`` particles with distribution ``D_N``; every other component is zero (``D_0`` included)."""

    N: int
    D_N: Any

    def sequence(self, space) -> GradedSequence:
        if self.N < 1:
            raise ValueError("a closed system has N >= 1 particles")
        if space.arity(self.D_N) != self.N:
            raise ValueError(f"D_N must have arity {self.N}")
        comps = [space.zeros(n) for n in range(self.N)] + [self.D_N]
        return GradedSequence(space, tuple(comps), closed=True)


@dataclass(frozen=True)
class GrandCanonical:
    """``D_n = z^n prod_i rho(x_i)`` with ``D_0 = 1``, cut at ``n_max``."""

    z: float
    profile: Any
    n_max: int = 8

    def sequence(self, space) -> GradedSequence:
        if not self.z > 0:
            raise ValueError("activity z must be positive")
        if space.arity(self.profile) != 1:
            raise ValueError("the profile is a one-particle function")
        if not math.isfinite(space.integrate_all(self.profile)):
            raise ValueError("profile is not integrable under the quadrature")
        comps = [space.constant(0, 1.0)]
        for n in range(1, self.n_max + 1):
            comps.append(space.product([(self.profile, (i,)) for i in range(n)] + [(space.constant(0, self.z**n), ())], n))
        return GradedSequence(space, tuple(comps), closed=False, truncation=self.n_max)


@dataclass(frozen=True)
class Chaos:
    """Initial marginal correlations ``(0, G_1, 0, ...)``."""

    G1: Any

    def sequence(self, space) -> GradedSequence:
        if space.arity(self.G1) != 1:
            raise ValueError("G_1 is a one-particle function")
        return GradedSequence(space, (space.zeros(0), self.G1), closed=True)


@dataclass(frozen=True)
class Explicit:
    seq: GradedSequence

    def sequence(self, space=None) -> GradedSequence:
        return self.seq


@dataclass(frozen=True)
class TruncationSpec:
    """Series order ``n_term`` and whether it is exact for the given data."""

    n_term: int
    exact: bool = False

    def __post_init__(self) -> None:
        if self.n_term < 0:
            raise ValueError("n_term must be nonnegative")

    @classmethod
    def resolve(cls, F0: GradedSequence, s: int, n_term: "int | TruncationSpec | None") -> "TruncationSpec":
        if isinstance(n_term, TruncationSpec):
            n_term = n_term.n_term
        available = max(0, F0.n_max - s)
        if n_term is None:
            n_term = available
        exact = F0.closed and n_term >= F0.n_max - s
        return cls(n_term, exact)


def _integrated_term(sp, f, n: int, extra: int):
    """``(1/n!) int f dx_{last extra}``."""
    return sp.linear_combination([1.0 / math.factorial(n)], [sp.integrate_last(f, extra)], sp.arity(f) - extra)


def _finish(sp, pieces: list, arity: int, by_order: bool):
    if by_order:
        return pieces
    return sp.linear_combination([1.0] * len(pieces), pieces, arity)


# ---------------------------------------------------------------------------
# Marginal distributions from distributions
# ---------------------------------------------------------------------------


def normalizer(D: GradedSequence) -> float:
    """``(D, I) = sum_n (1/n!) int D_n``."""
    sp = D.space
    return math.fsum(sp.integrate_all(c) / math.factorial(n) for n, c in enumerate(D.components) if not sp.is_zero(c))


def grand_canonical_marginals(D: GradedSequence) -> GradedSequence:
    """``F_s = (D,I)^{-1} sum_n (1/n!) int D_{s+n} dx_{s+1}..dx_{s+n}``; ``F_0 = 1``."""
    sp = D.space
    Z = normalizer(D)
    if not Z > 0:
        raise ValueError(f"normalizer (D, I) = {Z} is not positive")
    comps = [sp.constant(0, 1.0)]
    for s in range(1, D.n_max + 1):
        terms = [sp.integrate_last(D.components[s + n], n) for n in range(D.n_max - s + 1)]
        coeffs = [1.0 / (Z * math.factorial(n)) for n in range(D.n_max - s + 1)]
        comps.append(sp.linear_combination(coeffs, terms, s))
    return GradedSequence(sp, tuple(comps), closed=D.closed, truncation=None if D.closed else D.n_max)


def grand_canonical_marginals_by_order(D: GradedSequence, s: int, order: int) -> list:
    """Order-by-order parts of ``F_s`` when ``D_n`` is homogeneous of degree ``n``.

    The normalizer is a power series too, so the parts come from series
    division: ``Q_k = N_k - sum_{j>=1} c_j Q_{k-j}`` with ``c_j = (1/j!) int D_j``.
    """
    sp = D.space
    if D.scalar() != 1.0:
        raise PreconditionError("order-by-order marginals need D_0 = 1")
    numer = []
    for k in range(order + 1):
        numer.append(_integrated_term(sp, D.component(s + k), k, k))
    c = [sp.integrate_all(D.component(j)) / math.factorial(j) for j in range(order + 1)]
    out = []
    for k in range(order + 1):
        coeffs = [1.0] + [-c[j] for j in range(1, k + 1)]
        terms = [numer[k]] + [out[k - j] for j in range(1, k + 1)]
        out.append(sp.linear_combination(coeffs, terms, s))
    return out


def solve_marginal_distributions(
    F0: GradedSequence,
    s: int,
    t: float,
    model,
    n_term: "int | TruncationSpec | None" = None,
    by_order: bool = False,
    derivative: bool = False,
    coefficients: CoefficientRule | None = None,
):
    """``F_s(t) = sum_n (1/n!) int A_{1+n}(-t, {Y}, X minus Y) F_{s+n}(0) dx_{s+1}..dx_{s+n}``."""
    sp = model.space
    trunc = TruncationSpec.resolve(F0, s, n_term)
    pieces = []
    for n in range(trunc.n_term + 1):
        comp = F0.component(s + n)
        if sp.is_zero(comp):
            pieces.append(sp.zeros(s))
            continue
        op = cumulant(ClusterTuple.with_cluster(s, n), t, STATE, coefficients)
        pieces.append(_integrated_term(sp, op.apply(comp, model, derivative), n, n))
    return _finish(sp, pieces, s, by_order)


def solve_marginals_reduced(
    F0: GradedSequence,
    s: int,
    t: float,
    model,
    n_term: "int | TruncationSpec | None" = None,
    by_order: bool = False,
    derivative: bool = False,
):
    """Same expansion with the reduced cumulants ``U_{1+n} = sum_k (-1)^k C(n,k) S_{s+n-k}``."""
    sp = model.space
    trunc = TruncationSpec.resolve(F0, s, n_term)
    pieces = []
    for n in range(trunc.n_term + 1):
        comp = F0.component(s + n)
        if sp.is_zero(comp):
            pieces.append(sp.zeros(s))
            continue
        op = reduced_cumulant(s, n, t, STATE)
        pieces.append(_integrated_term(sp, op.apply(comp, model, derivative), n, n))
    return _finish(sp, pieces, s, by_order)


# ---------------------------------------------------------------------------
# Correlation functions
# ---------------------------------------------------------------------------


def _require_zero_scalar(g0: GradedSequence) -> None:
    if g0.scalar() != 0.0:
        raise PreconditionError("correlation sequences have g_0 = 0")


def solve_correlations(
    g0: GradedSequence,
    s: int,
    t: float,
    model,
    derivative: bool = False,
    coefficients: CoefficientRule | None = None,
):
    """``g_s(t) = sum_{P: Y = U X_i} A_{|P|}(-t, {X_1}..{X_|P|}) prod g_{|X_i|}(0, X_i)``."""
    _require_zero_scalar(g0)
    sp = model.space
    terms = []
    for blocks in set_partitions(tuple(range(s))):
        comps = [g0.component(len(b)) for b in blocks]
        if any(sp.is_zero(c) for c in comps):
            continue
        prod = sp.product(list(zip(comps, blocks)), s)
        terms.append(cumulant_on_clusters(blocks, t, STATE, coefficients).apply(prod, model, derivative))
    return sp.linear_combination([1.0] * len(terms), terms, s)


def cluster_correlation(g: GradedSequence, s: int, n: int):
    """``g_{1+n}({Y}, x_{s+1}..x_{s+n})``: the correlation with ``Y = (x_1..x_s)`` kept whole.

    Equals the sum over partitions of ``s+n`` variables in which every block
    meets ``Y`` of the products of ordinary correlations.
    """
    _require_zero_scalar(g)
    sp = g.space
    size = s + n
    terms = []
    for blocks in set_partitions(tuple(range(size))):
        if any(min(b) >= s for b in blocks):
            continue
        comps = [g.component(len(b)) for b in blocks]
        if any(sp.is_zero(c) for c in comps):
            continue
        terms.append(sp.product(list(zip(comps, blocks)), size))
    return sp.linear_combination([1.0] * len(terms), terms, size)


def solve_cluster_correlations(
    g0: GradedSequence,
    s: int,
    n: int,
    t: float,
    model,
    derivative: bool = False,
    coefficients: CoefficientRule | None = None,
):
    """Correlations on the ground ``({Y}, x_{s+1}..x_{s+n})`` at time ``t``.

    The Liouville-hierarchy solution with ``{Y}`` treated as one element: the
    block holding ``{Y}`` starts from :func:`cluster_correlation`, the others
    from ordinary correlations.
    """
    _require_zero_scalar(g0)
    sp = model.space
    size = s + n
    ground = ClusterTuple.with_cluster(s, n)
    terms = []
    for P in enumerate_partitions(ground):
        blocks = P.flat_blocks()
        factors = []
        zero = False
        for b in blocks:
            if 0 in b:
                comp = cluster_correlation(g0, s, len(b) - s)
            else:
                comp = g0.component(len(b))
            if sp.is_zero(comp):
                zero = True
                break
            factors.append((comp, b))
        if zero:
            continue
        prod = sp.product(factors, size)
        terms.append(cumulant(cluster_ground(blocks), t, STATE, coefficients).apply(prod, model, derivative))
    return sp.linear_combination([1.0] * len(terms), terms, size)


def marginals_from_correlations(
    g0: GradedSequence,
    s: int,
    t: float = 0.0,
    model=None,
    n_term: int | None = None,
    by_order: bool = False,
    derivative: bool = False,
    coefficients: CoefficientRule | None = None,
):
    """``F_s(t) = sum_n (1/n!) int g_{1+n}(t, {Y}, x_{s+1}..x_{s+n}) dx_{s+1}..dx_{s+n}``.

    Without a model the correlations are taken at ``t = 0``.
    """
    sp = g0.space
    n_term = max(0, g0.n_max - s) if n_term is None else n_term
    pieces = []
    for n in range(n_term + 1):
        if model is None:
            if derivative:
                raise ValueError("a time derivative needs a model")
            h = cluster_correlation(g0, s, n)
        else:
            h = solve_cluster_correlations(g0, s, n, t, model, derivative, coefficients)
        pieces.append(_integrated_term(sp, h, n, n))
    return _finish(sp, pieces, s, by_order)


def marginal_correlations_from_correlations(
    g0: GradedSequence,
    s: int,
    t: float = 0.0,
    model=None,
    n_term: int | None = None,
    by_order: bool = False,
    derivative: bool = False,
    coefficients: CoefficientRule | None = None,
):
    """``G_s(t) = sum_n (1/n!) int g_{s+n}(t) dx_{s+1}..dx_{s+n}``."""
    sp = g0.space
    n_term = max(0, g0.n_max - s) if n_term is None else n_term
    pieces = []
    for n in range(n_term + 1):
        if model is None:
            if derivative:
                raise ValueError("a time derivative needs a model")
            g = g0.component(s + n)
        else:
            g = solve_correlations(g0, s + n, t, model, derivative, coefficients)
        pieces.append(_integrated_term(sp, g, n, n))
    return _finish(sp, pieces, s, by_order)


# ---------------------------------------------------------------------------
# Marginal correlation functions
# ---------------------------------------------------------------------------


def solve_marginal_correlations(
    G0: GradedSequence,
    s: int,
    t: float,
    model,
    n_term: int | None = None,
    by_order: bool = False,
    derivative: bool = False,
    coefficients: CoefficientRule | None = None,
):
    """``G_s(t) = sum_n (1/n!) int U_{1+n}(t; {Y}, x_{s+1}..x_{s+n} | G(0)) dx``."""
    sp = model.space
    n_term = max(0, G0.n_max - s) if n_term is None else n_term
    pieces = []
    for n in range(n_term + 1):
        U = nonlinear_reduced_cumulant(s, n, t, G0, model, coefficients, derivative)
        pieces.append(_integrated_term(sp, U, n, n))
    return _finish(sp, pieces, s, by_order)


# ---------------------------------------------------------------------------
# Marginal observables
# ---------------------------------------------------------------------------


def marginal_observables_init(A0: GradedSequence) -> GradedSequence:
    """``B(0) = e^{-a+} A(0)``."""
    return exp_create_neg(A0)


def observables_from_marginal(B0: GradedSequence) -> GradedSequence:
    """``A = e^{a+} B``, the inverse of :func:`marginal_observables_init`."""
    return exp_create(B0)


def solve_marginal_observables(
    B0: GradedSequence,
    s: int,
    t: float,
    model,
    reduced: bool = False,
    derivative: bool = False,
    coefficients: CoefficientRule | None = None,
):
    """``B_s(t, Y) = sum_n (1/n!) sum_{j_1 != .. != j_n} A_{1+n}(t, {Y minus X}, X) B_{s-n}(0, Y minus X)``.

    The ordered sum over ``j``'s divided by ``n!`` is a sum over subsets ``X``.
    The term with ``X = Y`` contributes only for ``s = 0`` (cumulants of order
    two and higher annihilate constants).  With ``reduced`` the dual reduced
    cumulants ``sum_k (-1)^k C(n,k) S_{s-k}`` are used; after the sum over
    ``X`` this is ``sum_{Z subset X} (-1)^{|X|-|Z|} S(Y minus X + Z)``.
    """
    sp = model.space
    if s == 0:
        return B0.component(0)
    Y = tuple(range(s))
    coeffs, terms = [], []
    for X in subsets(Y):
        if len(X) == s:
            continue
        rest = tuple(i for i in Y if i not in X)
        comp = B0.component(len(rest))
        if sp.is_zero(comp):
            continue
        b = sp.product([(comp, rest)], s)
        if not reduced:
            ground = cluster_ground([rest] + [(x,) for x in X])
            terms.append(cumulant(ground, t, OBSERVABLE, coefficients).apply(b, model, derivative))
            coeffs.append(1.0)
        else:
            for Z in subsets(X):
                block = tuple(sorted(rest + Z))
                op = model.evolve_derivative if derivative else model.evolve
                terms.append(op(b, t, [block], OBSERVABLE))
                coeffs.append((-1.0) ** (len(X) - len(Z)))
    return sp.linear_combination(coeffs, terms, s)


# ---------------------------------------------------------------------------
# Whole sequences
# ---------------------------------------------------------------------------


def solution_sequence(solver, s_max: int, scalar: float, space, *args, **kwargs) -> GradedSequence:
    """Assemble ``(scalar, solver(.., 1, ..), .., solver(.., s_max, ..))``.

    ``solver`` is called as ``solver(*args[:1], s, *args[1:], **kwargs)``, which
    matches every ``solve_*`` signature above.
    """
    head, rest = args[0], args[1:]
    comps = [space.constant(0, scalar)]
    for s in range(1, s_max + 1):
        comps.append(solver(head, s, *rest, **kwargs))
    return GradedSequence(space, tuple(comps))
