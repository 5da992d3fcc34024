"""Brute-force references that bypass the cumulant machinery."""

from __future__ import annotations

import math

from ..dynamics import STATE
from ..reports import ResidualReport
from ..sequence_algebra import GradedSequence, mean_value_pairing
from ..solvers import ClosedSystem, normalizer

__all__ = ["oracle_closed_system", "duality_pairing", "evolve_sequence", "check_normalization_invariance"]


def oracle_closed_system(init: ClosedSystem, s: int, t: float, model):
    """Flow ``D_N`` for time ``t``, integrate out ``N - s`` variables and normalize.

    ``F_s(t) = (D, I)^{-1} (1/(N-s)!) int S_N(-t) D_N dx_{s+1}..dx_N`` with the
    normalizer ``(D, I) = (1/N!) int D_N``, which the flow preserves.
    """
    N = init.N
    if not 0 <= s <= N:
        raise ValueError(f"need 0 <= s <= N = {N}")
    sp = model.space
    Z = sp.integrate_all(init.D_N) / math.factorial(N)
    if not Z > 0:
        raise ValueError(f"normalizer (D, I) = {Z} is not positive")
    flowed = model.evolve(init.D_N, t, [tuple(range(N))], STATE)
    marginal = sp.integrate_last(flowed, N - s)
    return sp.linear_combination([1.0 / (Z * math.factorial(N - s))], [marginal], s)


def duality_pairing(b: GradedSequence, f: GradedSequence) -> float:
    """``<b, f> = sum_s (1/s!) int b_s f_s``, truncated at the common order."""
    return mean_value_pairing(b, f)


def evolve_sequence(seq: GradedSequence, t: float, model, direction: str = STATE) -> GradedSequence:
    """Componentwise ``S_n(-t) f_n`` (states) or ``S_n(t) f_n`` (observables)."""
    comps = tuple(
        c if n == 0 else model.evolve(c, t, [tuple(range(n))], direction) for n, c in enumerate(seq.components)
    )
    return GradedSequence(seq.space, comps, closed=seq.closed, truncation=seq.truncation)


def check_normalization_invariance(
    D0: GradedSequence, t: float, model, tolerance: float | None = None, params: dict | None = None
) -> ResidualReport:
    """``(S(-t) D(0), I) = (D(0), I)``, both sides integrated independently."""
    if tolerance is None:
        tolerance = 1e-10 if model.kind == "finite" else 1e-6
    before = normalizer(D0)
    after = normalizer(evolve_sequence(D0, t, model))
    return ResidualReport(
        "normalization_invariance",
        abs(after - before),
        tolerance,
        dict(params or {}, t=t),
        {"before": before, "after": after},
    )
