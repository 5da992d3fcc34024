"""Graded sequences of symmetric n-particle functions and their calculus.

A :class:`GradedSequence` ``f = (f_0, f_1, ..., f_nmax)`` carries one
component per particle number.  This module provides the generating
functional ``(f, u)``, the subset-convolution ``*``-product with its
exponential and logarithm (cluster expansions and cumulants of sequences),
functional derivatives as component shifts, and the annihilation/creation
maps with their exponentials.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from .combinatorics import (
    ClusterTuple,
    declusterize,
    enumerate_partitions,
    mobius_coefficient,
    subsets,
)
from .numerics import NumericError
from .spaces import FinitePhase, PhaseFunction, is_finite_space

__all__ = [
    "MissingComponentError",
    "PreconditionError",
    "GradedSequence",
    "identity_sequence",
    "integrate_out",
    "star_product",
    "exp_star",
    "ln_star",
    "cluster_expansion",
    "cluster_cumulant",
    "generating_functional",
    "generating_functional_terms",
    "functional_derivative",
    "derivative_tables",
    "annihilate",
    "exp_annihilate",
    "create",
    "exp_create",
    "exp_create_neg",
    "mean_value_pairing",
    "check_symmetry",
    "to_json",
    "from_json",
    "graded_partition_sum",
]


class MissingComponentError(ValueError):
    """A component beyond the available order of a sequence was requested."""


class PreconditionError(ValueError):
    """An operation was applied outside its domain (e.g. ``Exp*`` with f_0 != 0)."""


@dataclass(frozen=True)
class GradedSequence:
    """Components ``f_0 .. f_nmax`` on a common state space.

    ``closed`` marks every component beyond ``n_max`` as identically zero (a
    closed ``N``-particle system, or chaos data); otherwise asking for such a
    component is an error.  ``truncation`` records the series order at which a
    component-producing series was cut, when one was.
    """

    space: Any
    components: tuple
    closed: bool = False
    truncation: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        for n, c in enumerate(self.components):
            if self.space.arity(c) != n:
                raise ValueError(f"component {n} has arity {self.space.arity(c)}")

    @property
    def n_max(self) -> int:
        return len(self.components) - 1

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, n: int):
        return self.component(n)

    def component(self, n: int):
        if n < 0:
            raise IndexError(n)
        if n <= self.n_max:
            return self.components[n]
        if self.closed:
            return self.space.zeros(n)
        raise MissingComponentError(f"component {n} is not available (n_max={self.n_max})")

    def has_nonzero(self, n: int) -> bool:
        if n > self.n_max:
            if self.closed:
                return False
            raise MissingComponentError(f"component {n} is not available (n_max={self.n_max})")
        return not self.space.is_zero(self.components[n])

    def scalar(self) -> float:
        return self.space.scalar(self.components[0])

    def truncated(self, n_max: int) -> "GradedSequence":
        comps = [self.component(n) for n in range(n_max + 1)]
        closed = self.closed and n_max >= self.n_max
        return replace(self, components=tuple(comps), closed=closed)

    def scaled(self, c: float) -> "GradedSequence":
        sp = self.space
        comps = [sp.linear_combination([c], [f], n) for n, f in enumerate(self.components)]
        return replace(self, components=tuple(comps))

    def map(self, fn: Callable[[int, Any], Any], **changes) -> "GradedSequence":
        return replace(self, components=tuple(fn(n, f) for n, f in enumerate(self.components)), **changes)

    @classmethod
    def from_components(cls, space, components: Sequence, closed: bool = False, **kw) -> "GradedSequence":
        comps = []
        for n, c in enumerate(components):
            if c is None:
                c = space.zeros(n)
            elif is_finite_space(space):
                c = np.asarray(c, dtype=float)
            elif n == 0 and not isinstance(c, PhaseFunction):
                c = space.constant(0, float(c))
            comps.append(c)
        return cls(space, tuple(comps), closed=closed, **kw)

    @classmethod
    def zeros(cls, space, n_max: int, closed: bool = True) -> "GradedSequence":
        return cls(space, tuple(space.zeros(n) for n in range(n_max + 1)), closed=closed)


def identity_sequence(space, n_max: int) -> GradedSequence:
    """``I = (1, 0, 0, ...)``, the unit of the ``*``-product."""
    comps = [space.constant(0, 1.0)] + [space.zeros(n) for n in range(1, n_max + 1)]
    return GradedSequence(space, tuple(comps), closed=True)


def _same_space(f: GradedSequence, g: GradedSequence) -> None:
    if f.space != g.space:
        raise ValueError("sequences live on different state spaces")


def integrate_out(f, k: int, space):
    """Integrate the last ``k`` arguments of a particle function."""
    return space.integrate_last(f, k)


# ---------------------------------------------------------------------------
# *-product, Exp*, Ln*
# ---------------------------------------------------------------------------


def star_product(f: GradedSequence, g: GradedSequence) -> GradedSequence:
    """``(f*g)(Y) = sum over Z subset of Y of f(Z) g(Y minus Z)``."""
    _same_space(f, g)
    sp = f.space
    n_max = min(f.n_max, g.n_max)
    if f.closed and g.closed:
        n_max = f.n_max + g.n_max
    comps = []
    for s in range(n_max + 1):
        Y = tuple(range(s))
        terms = []
        for Z in subsets(Y):
            rest = tuple(i for i in Y if i not in Z)
            a, b = f.component(len(Z)), g.component(len(rest))
            if sp.is_zero(a) or sp.is_zero(b):
                continue
            terms.append(sp.product([(a, Z), (b, rest)], s))
        comps.append(sp.linear_combination([1.0] * len(terms), terms, s))
    trunc = None if (f.closed and g.closed) else n_max
    return GradedSequence(sp, tuple(comps), closed=f.closed and g.closed, truncation=trunc)


def _partition_sum(h: GradedSequence, ground: ClusterTuple, signed: bool):
    """``sum_P c(P) prod_blocks h_{|theta(B)|}(theta(B))`` on the flat variables."""
    sp = h.space
    labels = declusterize(ground)
    n = len(labels)
    if labels != tuple(range(n)):
        raise ValueError("ground labels must be 0..n-1")
    coeffs, terms = [], []
    for P in enumerate_partitions(ground):
        factors = []
        zero = False
        for block in P.flat_blocks():
            comp = h.component(len(block))
            if sp.is_zero(comp):
                zero = True
                break
            factors.append((comp, block))
        if zero:
            continue
        coeffs.append(mobius_coefficient(P) if signed else 1)
        terms.append(sp.product(factors, n))
    return sp.linear_combination(coeffs, terms, n)


def cluster_expansion(h: GradedSequence, ground: ClusterTuple):
    """Unsigned partition sum of ``h`` over a cluster tuple (``Exp*`` on clusters)."""
    return _partition_sum(h, ground, signed=False)


def cluster_cumulant(h: GradedSequence, ground: ClusterTuple):
    """Signed partition sum of ``h`` over a cluster tuple (``Ln*`` on clusters).

    For a ground ``({Y}, x_{s+1}, ...)`` this is the correlation function with
    the group ``Y`` treated as a single element.
    """
    return _partition_sum(h, ground, signed=True)


def exp_star(f: GradedSequence) -> GradedSequence:
    """``(Exp* f)_s = delta_{s,0} + sum over partitions of prod f``; needs ``f_0 = 0``."""
    sp = f.space
    if abs(f.scalar()) > 0.0:
        raise PreconditionError("Exp* needs a sequence with zero scalar component")
    comps = [sp.constant(0, 1.0)]
    for s in range(1, f.n_max + 1):
        comps.append(cluster_expansion(f, ClusterTuple.atoms(range(s))))
    return GradedSequence(sp, tuple(comps), closed=False, truncation=f.n_max)


def ln_star(h: GradedSequence) -> GradedSequence:
    """Inverse of :func:`exp_star`; needs ``h_0 = 1``."""
    sp = h.space
    if h.scalar() != 1.0:
        raise PreconditionError(f"Ln* needs a sequence with unit scalar component, got {h.scalar()}")
    comps = [sp.zeros(0)]
    for s in range(1, h.n_max + 1):
        comps.append(cluster_cumulant(h, ClusterTuple.atoms(range(s))))
    return GradedSequence(sp, tuple(comps), closed=False, truncation=h.n_max)


# ---------------------------------------------------------------------------
# Generating functional and functional derivatives
# ---------------------------------------------------------------------------


def _weighted_test(space, u):
    if is_finite_space(space):
        u = np.asarray(u, dtype=float)
        if u.shape != (space.M,):
            raise ValueError(f"test function must have {space.M} values")
        if not np.all(np.isfinite(u)):
            raise NumericError("test function has non-finite values")
        return space.weights * u
    return u


def _contract_all(space, f, wu):
    """``int f(x_1..x_n) prod u(x_i) dx`` for one component."""
    if is_finite_space(space):
        out = np.asarray(f, dtype=float)
        for _ in range(out.ndim):
            out = np.tensordot(out, wu, axes=([-1], [0]))
        return float(out)
    n = f.arity
    if n == 0:
        return space.scalar(f)
    g = space.product([(f, range(n))] + [(wu, (i,)) for i in range(n)], n)
    return space.integrate_all(g)


def generating_functional_terms(f: GradedSequence, u) -> list[float]:
    """The summands ``(1/n!) int f_n prod u`` for ``n = 0..n_max``."""
    sp = f.space
    wu = _weighted_test(sp, u)
    out = []
    for n, comp in enumerate(f.components):
        if sp.is_zero(comp):
            out.append(0.0)
            continue
        val = _contract_all(sp, comp, wu) / math.factorial(n)
        if not math.isfinite(val):
            raise NumericError(f"non-finite term at n={n}")
        out.append(val)
    return out


def generating_functional(f: GradedSequence, u) -> float:
    """``(f, u) = sum_n (1/n!) int f_n(x_1..x_n) u(x_1)...u(x_n) dx``, truncated at n_max."""
    return math.fsum(generating_functional_terms(f, u))


def functional_derivative(f: GradedSequence, x) -> GradedSequence:
    """The shifted sequence ``f^(x)_n(x_1..x_n) = f_{1+n}(x, x_1..x_n)``.

    On the finite model ``x`` is a point index; on the continuous model it is a
    phase point of length ``2d``.
    """
    sp = f.space
    comps = []
    for n in range(f.n_max):
        nxt = f.components[n + 1]
        if is_finite_space(sp):
            comps.append(np.asarray(nxt)[x])
        else:
            x0 = np.asarray(x, dtype=float)

            def shifted(X, nxt=nxt, x0=x0):
                head = np.broadcast_to(x0, X.shape[:-2] + (1, x0.shape[-1]))
                return nxt(np.concatenate([head, X], axis=-2))

            comps.append(PhaseFunction(n, shifted, f"d{nxt.label}"))
    return GradedSequence(sp, tuple(comps), closed=f.closed, truncation=f.truncation)


def derivative_tables(f: GradedSequence, u, k: int) -> dict[int, np.ndarray]:
    """``delta^k (f,u) / delta u(x_1)..delta u(x_k)`` on the finite model, split by degree.

    Returns ``{n: (1/n!) int f_{k+n}(x_1..x_k, y_1..y_n) prod u(y) dy}``; summing
    the values gives the full derivative as an arity-``k`` table.
    """
    sp = f.space
    if not is_finite_space(sp):
        raise NotImplementedError("derivative tables are exact only on the finite model")
    wu = _weighted_test(sp, u)
    out = {}
    for n in range(0, f.n_max - k + 1):
        comp = np.asarray(f.components[k + n], dtype=float)
        for _ in range(n):
            comp = np.tensordot(comp, wu, axes=([-1], [0]))
        out[n] = comp / math.factorial(n)
    return out


# ---------------------------------------------------------------------------
# Annihilation and creation
# ---------------------------------------------------------------------------


def annihilate(f: GradedSequence) -> GradedSequence:
    """``(a f)_n = int f_{n+1} dx_{n+1}``."""
    if f.n_max < 1:
        raise ValueError("annihilation needs n_max >= 1")
    sp = f.space
    comps = [sp.integrate_last(f.components[n + 1], 1) for n in range(f.n_max)]
    return GradedSequence(sp, tuple(comps), closed=f.closed, truncation=f.truncation)


def exp_annihilate(f: GradedSequence) -> GradedSequence:
    """``(e^a f)_s = sum_n (1/n!) int f_{s+n} dx_{s+1}..dx_{s+n}`` truncated at n_max.

    The identity ``(f, u+1) = (e^a f, u)`` holds exactly for closed sequences.
    """
    sp = f.space
    comps = []
    for s in range(f.n_max + 1):
        coeffs, terms = [], []
        for n in range(0, f.n_max - s + 1):
            comp = f.components[s + n]
            if sp.is_zero(comp):
                continue
            coeffs.append(1.0 / math.factorial(n))
            terms.append(sp.integrate_last(comp, n))
        comps.append(sp.linear_combination(coeffs, terms, s))
    trunc = None if f.closed else f.n_max
    return GradedSequence(sp, tuple(comps), closed=f.closed, truncation=trunc, meta={"exact": f.closed})


def create(b: GradedSequence) -> GradedSequence:
    """``(a+ b)_s(x_1..x_s) = sum_j b_{s-1}(x_1..x_s without x_j)``."""
    sp = b.space
    comps = [sp.zeros(0)]
    for s in range(1, b.n_max + 2):
        prev = b.components[s - 1]
        terms = [sp.embed(prev, [i for i in range(s) if i != j], s) for j in range(s)]
        comps.append(sp.linear_combination([1.0] * s, terms, s))
    return GradedSequence(sp, tuple(comps), closed=b.closed, truncation=b.truncation)


def _exp_create(a: GradedSequence, sign: float) -> GradedSequence:
    sp = a.space
    comps = []
    for s in range(a.n_max + 1):
        Y = tuple(range(s))
        coeffs, terms = [], []
        for R in subsets(Y):
            keep = [i for i in Y if i not in R]
            comp = a.components[len(keep)]
            if sp.is_zero(comp):
                continue
            coeffs.append(sign ** len(R))
            terms.append(sp.embed(comp, keep, s))
        comps.append(sp.linear_combination(coeffs, terms, s))
    return GradedSequence(sp, tuple(comps), closed=False, truncation=a.n_max)


def exp_create_neg(a: GradedSequence) -> GradedSequence:
    """``B_s = sum_n ((-1)^n/n!) sum_{j_1 != .. != j_n} A_{s-n}(Y minus x_j's)``.

    Marginal observables from observables; ``(A, u e^{-int u}) = (B, u)``.
    """
    return _exp_create(a, -1.0)


def exp_create(b: GradedSequence) -> GradedSequence:
    """Inverse of :func:`exp_create_neg`."""
    return _exp_create(b, 1.0)


def mean_value_pairing(b: GradedSequence, f: GradedSequence) -> float:
    """``<b, f> = sum_s (1/s!) int b_s f_s dx``, truncated at the common order."""
    _same_space(b, f)
    sp = b.space
    n_max = min(b.n_max, f.n_max)
    terms = []
    for s in range(n_max + 1):
        bs, fs = b.components[s], f.components[s]
        if sp.is_zero(bs) or sp.is_zero(fs):
            continue
        prod = sp.product([(bs, range(s)), (fs, range(s))], s)
        terms.append(sp.integrate_all(prod) / math.factorial(s))
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# Symmetry and serialization
# ---------------------------------------------------------------------------


def check_symmetry(f: GradedSequence, rng: np.random.Generator | None = None, samples: int = 8, tol: float = 1e-12) -> float:
    """Largest deviation under sampled argument permutations (0 when symmetric)."""
    rng = rng or np.random.default_rng(0)
    sp = f.space
    worst = 0.0
    for n, comp in enumerate(f.components):
        if n < 2:
            continue
        for _ in range(samples):
            perm = rng.permutation(n)
            if is_finite_space(sp):
                dev = np.max(np.abs(np.transpose(comp, perm) - comp))
            else:
                X = sp.random_points(n, 16, rng)
                dev = np.max(np.abs(comp(X[:, perm]) - comp(X)))
            worst = max(worst, float(dev))
    return worst


def to_json(f: GradedSequence) -> dict:
    if not is_finite_space(f.space):
        raise NotImplementedError("only finite-model sequences serialize to JSON")
    return {
        "M": f.space.M,
        "weights": f.space.weights.tolist(),
        "closed": f.closed,
        "components": {str(n): np.asarray(c, dtype=float).ravel(order="C").tolist() for n, c in enumerate(f.components)},
    }


def from_json(doc: dict | str) -> GradedSequence:
    if isinstance(doc, str):
        doc = json.loads(doc)
    space = FinitePhase(int(doc["M"]), doc.get("weights"))
    comps_doc = doc["components"]
    n_max = max(int(k) for k in comps_doc) if comps_doc else 0
    comps = []
    for n in range(n_max + 1):
        flat = comps_doc.get(str(n))
        if flat is None:
            comps.append(space.zeros(n))
            continue
        arr = np.asarray(flat, dtype=float)
        if arr.size != space.M**n:
            raise ValueError(f"component {n} needs {space.M**n} values, got {arr.size}")
        comps.append(arr.reshape((space.M,) * n))
    return GradedSequence(space, tuple(comps), closed=bool(doc.get("closed", False)))


# ---------------------------------------------------------------------------
# Order-graded partition sums
# ---------------------------------------------------------------------------


def graded_partition_sum(pieces: dict[int, Sequence], s: int, order: int, space, signed: bool = False) -> list:
    """Partition sum over ``s`` variables, split by total order.

    ``pieces[m][a]`` is the order-``a`` part of an ``m``-particle function
    (homogeneous of degree ``m + a`` in the initial data).  Returns the parts of
    orders ``0..order`` of ``sum_P c(P) prod_blocks f_{|X_i|}(X_i)`` with ``c = 1``
    (``Exp*``) or the Mobius coefficient (``Ln*``).  Products whose orders add
    beyond ``order`` are dropped, so truncated series can be compared order by
    order.
    """
    from .combinatorics import set_partitions, weak_compositions

    out = []
    for a in range(order + 1):
        coeffs, terms = [], []
        for blocks in set_partitions(tuple(range(s))):
            c = mobius_coefficient(len(blocks)) if signed else 1
            for comp in weak_compositions(a, len(blocks)):
                factors = []
                zero = False
                for block, ai in zip(blocks, comp):
                    parts = pieces.get(len(block), ())
                    if ai >= len(parts):
                        raise MissingComponentError(f"order {ai} part of component {len(block)} is missing")
                    f = parts[ai]
                    if space.is_zero(f):
                        zero = True
                        break
                    factors.append((f, block))
                if zero:
                    continue
                coeffs.append(c)
                terms.append(space.product(factors, s))
        out.append(space.linear_combination(coeffs, terms, s))
    return out
