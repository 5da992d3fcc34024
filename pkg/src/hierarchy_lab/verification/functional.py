"""Evolution equations for generating functionals, checked on the finite model.

Both sides are split by their degree in the test function ``u``: the left side
is ``d/dt`` of the generating functional and the right side is assembled from
exact functional-derivative tables with the Poisson brackets replaced by the
finite generators.  Each equation sums over every interaction order present
in the model, so the pair forms are the special case of a pair model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..combinatorics import set_partitions, subsets
from ..dynamics import apply_sites
from ..reports import ResidualReport
from ..sequence_algebra import GradedSequence, derivative_tables, generating_functional_terms
from ..spaces import is_finite_space

__all__ = ["FunctionalEquation", "EQUATIONS", "functional_equation_residual", "functional_rhs_terms"]


@dataclass(frozen=True)
class FunctionalEquation:
    """Shape of one equation.

    ``weight`` is ``"u"`` or ``"u+1"`` (the factor multiplying every
    integrated variable); ``tables`` says how derivative tables on the ``k``
    interacting variables combine: ``"single"`` uses ``T_k``, ``"partitions"``
    the sum over partitions of products of tables, ``"subsets"`` the sum over
    nonempty subsets of the lower tables.  ``sign`` is ``-1`` for observables.
    """

    sequence: str
    weight: str
    tables: str
    sign: float


EQUATIONS: dict[str, FunctionalEquation] = {
    "liouville": FunctionalEquation("D", "u", "single", 1.0),
    "bbgky": FunctionalEquation("F", "u+1", "single", 1.0),
    "correlations": FunctionalEquation("g", "u", "partitions", 1.0),
    "marginal_correlations": FunctionalEquation("G", "u+1", "partitions", 1.0),
    "observables": FunctionalEquation("A", "u", "single", -1.0),
    "dual": FunctionalEquation("B", "u", "subsets", -1.0),
}


def _graded_embed(parts: dict[int, np.ndarray], positions, k: int, M: int) -> dict[int, np.ndarray]:
    out = {}
    for deg, arr in parts.items():
        full = np.reshape(arr, np.shape(arr) + (1,) * (k - np.ndim(arr)))
        rest = [i for i in range(k) if i not in positions]
        out[deg] = np.broadcast_to(np.moveaxis(full, list(range(k)), list(positions) + rest), (M,) * k)
    return out


def _graded_mul(a: dict, b: dict, cap: int) -> dict:
    out: dict[int, np.ndarray] = {}
    for da, xa in a.items():
        for db, xb in b.items():
            if da + db <= cap:
                out[da + db] = out.get(da + db, 0) + xa * xb
    return out


def _graded_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for d, x in b.items():
        out[d] = out.get(d, 0) + x
    return out


def _combined_tables(eq: FunctionalEquation, tables: dict[int, dict], k: int, M: int, cap: int) -> dict:
    sites = tuple(range(k))
    if eq.tables == "single":
        return dict(tables[k])
    total: dict = {}
    if eq.tables == "partitions":
        for blocks in set_partitions(sites):
            prod = {0: np.ones((M,) * k)}
            for b in blocks:
                prod = _graded_mul(prod, _graded_embed(tables[len(b)], b, k, M), cap)
            total = _graded_add(total, prod)
        return total
    if eq.tables == "subsets":
        for Z in subsets(sites, 1):
            total = _graded_add(total, _graded_embed(tables[len(Z)], Z, k, M))
        return total
    raise ValueError(f"unknown table combination {eq.tables!r}")


def _contract(arr: np.ndarray, vectors) -> float:
    out = arr
    for v in vectors:
        out = np.tensordot(out, v, axes=([0], [0]))
    return float(out)


def functional_rhs_terms(seq: GradedSequence, u, equation: str, model, degrees: int) -> list[float]:
    """Right side of the equation split by degree ``0..degrees`` in ``u``."""
    eq = EQUATIONS[equation]
    sp = seq.space
    L = model.liouvillian
    M = sp.M
    w = sp.weights
    wu = w * np.asarray(u, dtype=float)
    orders = (1,) + tuple(model.interaction_orders)
    kmax = max(orders)
    tables = {m: derivative_tables(seq, u, m) for m in range(1, kmax + 1)}
    out = [0.0] * (degrees + 1)
    for k in orders:
        G = L.local(k)
        if G is None:
            continue
        combo = _combined_tables(eq, tables, k, M, degrees)
        for deg, table in combo.items():
            acted = apply_sites(G, np.array(table, dtype=float), tuple(range(k)))
            if eq.weight == "u":
                d = deg + k
                if d <= degrees:
                    out[d] += eq.sign * _contract(acted, [wu] * k) / math.factorial(k)
            else:
                for S in subsets(tuple(range(k))):
                    d = deg + len(S)
                    if d <= degrees:
                        vecs = [wu if i in S else w for i in range(k)]
                        out[d] += eq.sign * _contract(acted, vecs) / math.factorial(k)
    return out


def functional_equation_residual(
    seq: GradedSequence,
    dseq: GradedSequence,
    u,
    equation: str,
    model,
    tolerance: float = 1e-8,
    degrees: int | None = None,
    params: dict | None = None,
) -> ResidualReport:
    """Compare ``d/dt (seq, u)`` (from the time-derivative sequence ``dseq``) with the right side.

    Residual is the largest per-degree difference.  Without ``degrees`` every
    degree that the available components determine is compared.
    """
    if equation not in EQUATIONS:
        raise ValueError(f"unknown equation {equation!r}; choose from {sorted(EQUATIONS)}")
    if not is_finite_space(seq.space):
        raise NotImplementedError("functional-derivative equations are verified on the finite model only")
    eq = EQUATIONS[equation]
    if degrees is None:
        shift = max((1,) + tuple(model.interaction_orders)) if eq.weight == "u+1" and not seq.closed else 0
        degrees = min(seq.n_max - shift, dseq.n_max)
    if degrees < 0:
        raise ValueError("not enough components to compare any degree")
    lhs = generating_functional_terms(dseq, u)[: degrees + 1]
    lhs += [0.0] * (degrees + 1 - len(lhs))
    rhs = functional_rhs_terms(seq, u, equation, model, degrees)
    residual = max(abs(a - b) for a, b in zip(lhs, rhs))
    return ResidualReport(
        f"functional:{equation}",
        float(residual),
        tolerance,
        dict(params or {}, degrees=degrees),
        {"lhs_total": math.fsum(lhs), "rhs_total": math.fsum(rhs)},
    )
