"""Right-hand sides of the componentwise hierarchies.

Each hierarchy is assembled from terms of one shape: a product of sequence
components placed on given variables, acted on by the interaction generator
of a set of sites, with trailing added variables integrated out.  Keeping the
terms symbolic lets the same right-hand side be evaluated either on plain
sequences or order by order on graded series pieces (a term whose product has
``n`` integrated variables takes pieces whose orders add to ``a - n``, so that
every term of order ``a`` is homogeneous of the same degree).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from ..combinatorics import set_partitions, subsets, weak_compositions
from ..sequence_algebra import GradedSequence, MissingComponentError

__all__ = [
    "HierarchyTerm",
    "bbgky_terms",
    "liouville_terms",
    "nonlinear_bbgky_terms",
    "dual_bbgky_terms",
    "bbgky_rhs",
    "liouville_hierarchy_rhs",
    "nonlinear_bbgky_rhs",
    "dual_bbgky_rhs",
    "evaluate_terms",
    "evaluate_terms_by_order",
]


@dataclass(frozen=True)
class HierarchyTerm:
    """``coef * int G_sites prod_j f_{m_j}(positions_j) dx_{last n_int}``.

    ``sites = None`` stands for the full generator of all ``s + n_int`` variables.
    """

    coef: float
    sites: tuple[int, ...] | None
    n_int: int
    factors: tuple[tuple[int, tuple[int, ...]], ...]


def _orders(model) -> tuple[int, ...]:
    return tuple(model.interaction_orders)


def bbgky_terms(s: int, model, n_cut: int | None = None) -> list[HierarchyTerm]:
    """``L_s F_s + sum_{I subset Y} sum_n (1/n!) int G_{|I|+n}(I, x_{s+1}..x_{s+n}) F_{s+n}``."""
    if s < 1:
        raise ValueError("the hierarchy starts at s = 1")
    terms = [HierarchyTerm(1.0, None, 0, ((s, tuple(range(s))),))]
    for k in _orders(model):
        for I in subsets(tuple(range(s)), 1):
            n = k - len(I)
            if n < 1 or (n_cut is not None and n > n_cut):
                continue
            sites = I + tuple(range(s, s + n))
            terms.append(HierarchyTerm(1.0 / math.factorial(n), sites, n, ((s + n, tuple(range(s + n))),)))
    return terms


def liouville_terms(s: int, model) -> list[HierarchyTerm]:
    """``sum_P sum_{J meeting every block} G_J prod g_{|X_i|}(X_i)``; one block gives ``L_s g_s``."""
    if s < 1:
        raise ValueError("the hierarchy starts at s = 1")
    terms = [HierarchyTerm(1.0, None, 0, ((s, tuple(range(s))),))]
    orders = set(_orders(model))
    for blocks in set_partitions(tuple(range(s))):
        if len(blocks) == 1:
            continue
        factors = tuple((len(b), tuple(b)) for b in blocks)
        for J in subsets(tuple(range(s)), 2):
            if len(J) in orders and all(set(J) & set(b) for b in blocks):
                terms.append(HierarchyTerm(1.0, J, 0, factors))
    return terms


def _pair_only(model) -> bool:
    return set(_orders(model)) <= {2}


def nonlinear_bbgky_terms(
    s: int, model, general: bool = False, n_cut: int | None = None, literal: bool = False
) -> list[HierarchyTerm]:
    """Terms of the hierarchy for marginal correlation functions.

    The first two groups are the Liouville-hierarchy terms on ``Y``.  The
    collision group couples ``k`` variables of ``Y`` with ``n + 1 - k`` added
    ones through ``Phi^{(n+1)}`` and sums over partitions of all of them in
    which no block lies inside ``Y`` minus the coupled variables.  For pair
    potentials this is the standard quadratic structure.

    Higher orders need ``general=True``.  By default each collision term then
    carries ``1/(n+1-k)!`` for the symmetric integration over the added
    variables, which makes the hierarchy close on the finite model;
    ``literal=True`` drops that factor (the unweighted form, kept for
    comparison, does not close once three or more bodies interact).
    """
    if not _pair_only(model) and not general:
        raise NotImplementedError(
            "the collision terms are verified for pair potentials only; pass general=True for the many-body form"
        )
    terms = liouville_terms(s, model)
    Y = tuple(range(s))
    for order in _orders(model):
        n = order - 1
        if n_cut is not None and n > n_cut:
            continue
        for k in range(1, min(n, s) + 1):
            added = n + 1 - k
            size = s + added
            for J in subsets(Y, k):
                if len(J) != k:
                    continue
                sites = J + tuple(range(s, size))
                rest = set(Y) - set(J)
                for blocks in set_partitions(tuple(range(size))):
                    if len(blocks) > n + 1 or any(set(b) <= rest for b in blocks):
                        continue
                    factors = tuple((len(b), tuple(b)) for b in blocks)
                    coef = 1.0 if literal else 1.0 / math.factorial(added)
                    terms.append(HierarchyTerm(coef, sites, added, factors))
    return terms


def dual_bbgky_terms(s: int, model) -> list[HierarchyTerm]:
    """``-L_s B_s - sum_J sum_{R nonempty, R strictly inside J} G_J B_{s-|R|}(Y minus R)``."""
    if s < 1:
        raise ValueError("the hierarchy starts at s = 1")
    Y = tuple(range(s))
    terms = [HierarchyTerm(-1.0, None, 0, ((s, Y),))]
    orders = set(_orders(model))
    for J in subsets(Y, 2):
        if len(J) not in orders:
            continue
        for R in subsets(J, 1):
            if len(R) == len(J):
                continue
            keep = tuple(i for i in Y if i not in R)
            terms.append(HierarchyTerm(-1.0, J, 0, ((len(keep), keep),)))
    return terms


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _apply(term: HierarchyTerm, prod, model, arity: int):
    sp = model.space
    out = model.liouville(prod) if term.sites is None else model.interaction(prod, term.sites)
    if term.n_int:
        out = sp.integrate_last(out, term.n_int)
    return sp.linear_combination([term.coef], [out], arity)


def evaluate_terms(terms: Sequence[HierarchyTerm], get: Callable[[int], object], s: int, model):
    """Sum the terms with ``get(m)`` supplying the ``m``-particle component."""
    sp = model.space
    out = []
    for term in terms:
        size = s + term.n_int
        comps = [(get(m), pos) for m, pos in term.factors]
        if any(sp.is_zero(c) for c, _ in comps):
            continue
        out.append(_apply(term, sp.product(comps, size), model, s))
    return sp.linear_combination([1.0] * len(out), out, s)


def evaluate_terms_by_order(terms: Sequence[HierarchyTerm], pieces: dict[int, Sequence], s: int, order: int, model):
    """Order-``order`` part of the right-hand side from graded pieces ``pieces[m][a]``."""
    sp = model.space
    out = []
    for term in terms:
        budget = order - term.n_int
        if budget < 0:
            continue
        size = s + term.n_int
        for comp in weak_compositions(budget, len(term.factors)):
            factors = []
            for (m, pos), a in zip(term.factors, comp):
                parts = pieces.get(m, ())
                if a >= len(parts):
                    raise MissingComponentError(f"order {a} part of component {m} is missing")
                factors.append((parts[a], pos))
            if any(sp.is_zero(c) for c, _ in factors):
                continue
            out.append(_apply(term, sp.product(factors, size), model, s))
    return sp.linear_combination([1.0] * len(out), out, s)


def _getter(seq: GradedSequence):
    def get(m: int):
        try:
            return seq.component(m)
        except MissingComponentError as exc:
            raise MissingComponentError(f"hierarchy right-hand side needs component {m}: {exc}") from None

    return get


def bbgky_rhs(F: GradedSequence, s: int, model, n_cut: int | None = None):
    """``{H_s, F_s} + sum_i int {Phi(q_i - q_{s+1}), F_{s+1}} dx_{s+1}`` and its many-body form."""
    return evaluate_terms(bbgky_terms(s, model, n_cut), _getter(F), s, model)


def liouville_hierarchy_rhs(g: GradedSequence, s: int, model):
    """Right-hand side of the hierarchy for correlation functions."""
    return evaluate_terms(liouville_terms(s, model), _getter(g), s, model)


def nonlinear_bbgky_rhs(
    G: GradedSequence, s: int, model, general: bool = False, n_cut: int | None = None, literal: bool = False
):
    """Right-hand side of the hierarchy for marginal correlation functions."""
    return evaluate_terms(nonlinear_bbgky_terms(s, model, general, n_cut, literal), _getter(G), s, model)


def dual_bbgky_rhs(B: GradedSequence, s: int, model):
    """``{B_s, H_s} + sum_{i != j} {B_{s-1}(Y minus x_i), Phi(q_i - q_j)}`` and its many-body form."""
    return evaluate_terms(dual_bbgky_terms(s, model), _getter(B), s, model)
