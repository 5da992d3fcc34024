"""Identity and residual suites on the finite and continuous models.

A suite is a list of named checks; each check is a pure function of the
model, its own seeded generator and the run options, returning one or more
:class:`ResidualReport`.  Checks run in a thread pool (capped by
``HIERARCHY_LAB_THREADS``) and their reports are merged in check order, so a
run is reproducible regardless of scheduling.
"""

from __future__ import annotations

import math
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..combinatorics import ClusterTuple, alternating_partition_sum
from ..cumulants import CoefficientRule, cumulant, nonlinear_reduced_cumulant, verify_cluster_expansion, verify_dual_recurrence
from ..dynamics import OBSERVABLE, STATE, ContinuousModel, FiniteLiouvillian, FiniteModel, HarmonicPair, Hamiltonian
from ..numerics import max_abs
from ..reports import ResidualReport
from ..sequence_algebra import (
    GradedSequence,
    cluster_cumulant,
    create,
    derivative_tables,
    exp_annihilate,
    exp_create,
    exp_create_neg,
    exp_star,
    generating_functional,
    generating_functional_terms,
    graded_partition_sum,
    ln_star,
    mean_value_pairing,
    annihilate,
    star_product,
)
from ..solvers import (
    ClosedSystem,
    grand_canonical_marginals,
    grand_canonical_marginals_by_order,
    cluster_correlation,
    marginal_correlations_from_correlations,
    marginal_observables_init,
    marginals_from_correlations,
    solve_correlations,
    solve_marginal_correlations,
    solve_marginal_distributions,
    solve_marginal_observables,
    solve_marginals_reduced,
)
from ..spaces import ContinuousPhase, PhaseFunction
from .functional import functional_equation_residual
from .hierarchies import (
    bbgky_rhs,
    dual_bbgky_rhs,
    evaluate_terms_by_order,
    liouville_hierarchy_rhs,
    nonlinear_bbgky_terms,
)
from .oracles import check_normalization_invariance, evolve_sequence, oracle_closed_system

__all__ = [
    "SUITES",
    "SuiteOptions",
    "finite_model",
    "continuous_model",
    "gaussian_closed_system",
    "suite_checks",
    "run_suite",
    "thread_cap",
]

SUITES = ("algebra", "cumulants", "bbgky", "dual", "correlations", "nonlinear", "functional")


@dataclass(frozen=True)
class SuiteOptions:
    """Run options shared by every check.

    ``tolerances`` overrides the default tolerance of a check by its name.
    """

    seed: int = 0
    t: float = 0.7
    n_max: int = 5
    s_max: int = 3
    coefficients: CoefficientRule | None = None
    tolerances: dict[str, float] = field(default_factory=dict)

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))


Check = Callable[[object, np.random.Generator, SuiteOptions], list[ResidualReport]]


def thread_cap() -> int:
    raw = os.environ.get("HIERARCHY_LAB_THREADS")
    if raw is None:
        return min(8, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"HIERARCHY_LAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"HIERARCHY_LAB_THREADS must be a positive integer, got {raw!r}")
    return n


def _check_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


# ---------------------------------------------------------------------------
# Models and data
# ---------------------------------------------------------------------------


def finite_model(seed: int = 0, M: int = 2, k_max: int = 2, weights=None, interaction_scale: float = 0.7) -> FiniteModel:
    rng = np.random.default_rng([seed, 1])
    if weights is None:
        weights = 0.5 + rng.random(M)
    L = FiniteLiouvillian.random(M, rng, weights=weights, k_max=k_max, interaction_scale=interaction_scale)
    return FiniteModel(L)


def continuous_model(kappa: float = 1.0, mass: float = 1.0, nodes: int = 20, dt: float = 1e-3) -> ContinuousModel:
    h = Hamiltonian(mass=mass, d=1, pair=HarmonicPair(kappa))
    return ContinuousModel(h, ContinuousPhase(d=1, nodes=nodes), dt=dt)


def gaussian_closed_system(N: int = 3, shift: float = 0.3, coupling: float = 0.25) -> ClosedSystem:
    """Symmetric Gaussian ``D_N`` with a position offset and pairwise position coupling (``d = 1``)."""

    def density(X):
        q, p = X[..., 0], X[..., 1]
        e = -0.5 * np.sum((q - shift) ** 2 + p**2, axis=-1)
        for i in range(N):
            for j in range(i + 1, N):
                e = e - coupling * (q[..., i] - q[..., j]) ** 2
        return np.exp(e)

    return ClosedSystem(N, PhaseFunction(N, density, f"gauss{N}"))


def _gaussian(arity: int, centers: np.ndarray, amp: float = 1.0, width: float = 1.0) -> PhaseFunction:
    def fn(X):
        return amp * np.exp(-0.5 * np.sum((X - centers) ** 2, axis=(-1, -2)) / width**2)

    return PhaseFunction(arity, fn, f"g{arity}")


def _symmetric_gaussian(arity: int, amp: float, shift: float = 0.2) -> PhaseFunction:
    c = np.array([shift, 0.0])

    def fn(X):
        return amp * np.exp(-0.5 * np.sum((X - c) ** 2, axis=(-1, -2)))

    return PhaseFunction(arity, fn, f"sg{arity}")


def _random_sequence(sp, rng, n_max: int, scale: float = 0.5, head: float = 0.0, positive: bool = False) -> GradedSequence:
    comps = [sp.constant(0, head)]
    for n in range(1, n_max + 1):
        c = sp.random_symmetric(n, rng, scale)
        comps.append(np.abs(c) + 0.05 if positive else c)
    return GradedSequence(sp, tuple(comps), closed=True)


def _seq(sp, comps, closed: bool = True) -> GradedSequence:
    return GradedSequence(sp, tuple(comps), closed=closed)


def _closed_states(model, rng, N: int, t: float, coefficients=None, derivative: bool = False):
    sp = model.space
    D = ClosedSystem(N, np.abs(sp.random_symmetric(N, rng)) + 0.05).sequence(sp)
    F0 = grand_canonical_marginals(D)
    head = sp.zeros(0) if derivative else sp.constant(0, 1.0)
    comps = [head] + [
        solve_marginal_distributions(F0, s, t, model, derivative=derivative, coefficients=coefficients) for s in range(1, N + 1)
    ]
    return D, F0, _seq(sp, comps)


def _residual(model, a, b, rng, arity: int, samples: int = 6, relative: bool = False) -> float:
    if model.kind == "finite":
        diff = max_abs(np.asarray(a) - np.asarray(b))
        scale = max_abs(np.asarray(b))
    else:
        X = model.space.random_points(arity, samples, rng)
        vb = b(X)
        diff = max_abs(a(X) - vb)
        scale = max_abs(vb)
    if relative:
        return diff / scale if scale > 0 else diff
    return diff


def _params(model, **kw) -> dict:
    return dict(kw, model=model.kind)


def _initial_value(name: str, model, got, expected, rng, arity: int, opt: SuiteOptions, **params) -> ResidualReport:
    """A solution of the initial-value problem must also reproduce its data at ``t = 0``."""
    tol = opt.tol("initial_value", 1e-12 if model.kind == "finite" else 1e-10)
    return ResidualReport(name, _residual(model, got, expected, rng, arity), tol, _params(model, t=0.0, **params))


# ---------------------------------------------------------------------------
# algebra
# ---------------------------------------------------------------------------


def _algebra_finite(model, rng, opt: SuiteOptions) -> list[ResidualReport]:
    sp = model.space
    n = opt.n_max
    tol = opt.tol("algebra", 1e-12)
    out = []
    f = _random_sequence(sp, rng, n // 2 + 1, head=0.4)
    g = _random_sequence(sp, rng, n - n // 2 - 1, head=-0.3)
    u = rng.standard_normal(sp.M) * 0.5
    lhs = generating_functional(star_product(f, g), u)
    rhs = generating_functional(f, u) * generating_functional(g, u)
    out.append(ResidualReport("algebra.star_homomorphism", abs(lhs - rhs), tol, _params(model, n_max=n)))

    h = _random_sequence(sp, rng, n, scale=0.4)
    rt = ln_star(exp_star(h))
    out.append(ResidualReport("algebra.ln_exp_roundtrip", max(max_abs(a - b) for a, b in zip(rt.components, h.components)), tol, _params(model, n_max=n)))
    H = _random_sequence(sp, rng, n, scale=0.4, head=1.0)
    rt = exp_star(ln_star(H))
    out.append(ResidualReport("algebra.exp_ln_roundtrip", max(max_abs(a - b) for a, b in zip(rt.components, H.components)), tol, _params(model, n_max=n)))

    # (Exp* h, u) = exp((h, u)), compared degree by degree
    c = generating_functional_terms(h, u)
    series = [1.0] + [0.0] * n
    for k in range(1, n + 1):
        # e' = c' e for the power series in the degree variable
        series[k] = sum(j * c[j] * series[k - j] for j in range(1, k + 1)) / k
    lhs_terms = generating_functional_terms(exp_star(h), u)
    out.append(ResidualReport("algebra.exp_functional", max(abs(a - b) for a, b in zip(lhs_terms, series)), tol, _params(model, n_max=n)))

    D = _random_sequence(sp, rng, n, head=0.7)
    lhs = generating_functional(D, u + 1.0)
    rhs = generating_functional(exp_annihilate(D), u)
    out.append(ResidualReport("algebra.annihilation_shift", abs(lhs - rhs), tol, _params(model, n_max=n)))

    A = _random_sequence(sp, rng, n, head=0.2)
    terms_A = generating_functional_terms(A, u)
    mass = float(sp.integrate_all(u))
    B = exp_create_neg(A)
    terms_B = generating_functional_terms(B, u)
    worst = 0.0
    for deg in range(n + 1):
        expect = sum(terms_A[k] * (-mass) ** (deg - k) / math.factorial(deg - k) for k in range(deg + 1))
        worst = max(worst, abs(expect - terms_B[deg]))
    out.append(ResidualReport("algebra.creation_shift", worst, tol, _params(model, n_max=n)))

    b = _random_sequence(sp, rng, n - 1, head=0.5)
    f2 = _random_sequence(sp, rng, n, head=0.9)
    lhs = mean_value_pairing(create(b), f2)
    rhs = mean_value_pairing(b, annihilate(f2))
    out.append(ResidualReport("algebra.adjointness", abs(lhs - rhs), tol, _params(model, n_max=n)))

    back = exp_create(exp_create_neg(A))
    out.append(ResidualReport("algebra.creation_roundtrip", max(max_abs(a - b) for a, b in zip(back.components, A.components)), tol, _params(model, n_max=n)))

    worst = 0.0
    zero = np.zeros(sp.M)
    for k in range(1, n + 1):
        worst = max(worst, max_abs(derivative_tables(h, zero, k)[0] - h.components[k]))
    out.append(ResidualReport("algebra.derivative_at_zero", worst, tol, _params(model, n_max=n)))
    return out


def _algebra_continuous(model, rng, opt: SuiteOptions) -> list[ResidualReport]:
    sp = model.space
    tol = opt.tol("algebra_continuous", 1e-8)
    out = []
    f = _seq(sp, [sp.constant(0, 0.5), _symmetric_gaussian(1, 0.6)])
    g = _seq(sp, [sp.constant(0, -0.4), _symmetric_gaussian(1, 0.3, 0.4)])
    u = _gaussian(1, np.array([[0.1, -0.2]]), 0.4, 1.3)
    lhs = generating_functional(star_product(f, g), u)
    rhs = generating_functional(f, u) * generating_functional(g, u)
    out.append(ResidualReport("algebra.star_homomorphism", abs(lhs - rhs), tol, _params(model, nodes=sp.nodes)))

    h = _seq(sp, [sp.zeros(0), _symmetric_gaussian(1, 0.6), _symmetric_gaussian(2, 0.2, -0.1), _symmetric_gaussian(3, 0.1)])
    rt = ln_star(exp_star(h))
    out.append(ResidualReport("algebra.ln_exp_roundtrip", max(_residual(model, a, b, rng, k) for k, (a, b) in enumerate(zip(rt.components, h.components)) if k), tol, _params(model)))
    lhs = generating_functional(f, _shifted(u, 1.0))
    rhs = generating_functional(exp_annihilate(f), u)
    out.append(ResidualReport("algebra.annihilation_shift", abs(lhs - rhs), tol, _params(model, nodes=sp.nodes)))
    return out


def _shifted(u: PhaseFunction, c: float) -> PhaseFunction:
    return PhaseFunction(1, lambda X: u(X) + c, "u+c")


def _algebra(model, rng, opt):
    return _algebra_finite(model, rng, opt) if model.kind == "finite" else _algebra_continuous(model, rng, opt)


# ---------------------------------------------------------------------------
# cumulants
# ---------------------------------------------------------------------------


def _max_ground(model) -> int:
    if model.kind != "finite":
        return 3
    M = model.space.M
    return 6 if M <= 2 else 5 if M == 3 else 4


def _cumulant_checks(model, opt: SuiteOptions) -> list[tuple[str, Check]]:
    size = _max_ground(model)
    tol = opt.tol("cluster_expansion", 1e-10 if model.kind == "finite" else 1e-8)
    checks: list[tuple[str, Check]] = []
    for total in range(1, size + 1):
        for s in range(1, total + 1):
            n = total - s
            if s > 1 and n == 0:
                continue
            for direction in (STATE, OBSERVABLE):

                def check(model, rng, opt, s=s, n=n, direction=direction):
                    r = verify_cluster_expansion(s, n, opt.t, model, direction, opt.coefficients, tol)
                    return [_renamed(r, "cumulants.cluster_expansion")]

                checks.append((f"cumulants.cluster_expansion.{direction}.s{s}.n{n}", check))
    for s in range(1, size + 1):
        for n in range(s):

            def dual(model, rng, opt, s=s, n=n):
                r = verify_dual_recurrence(s, n, opt.t, model, opt.coefficients, tol, rng)
                return [_renamed(r, "cumulants.dual_recurrence")]

            checks.append((f"cumulants.dual_recurrence.s{s}.n{n}", dual))

    def alternating(model, rng, opt):
        worst = max(abs(alternating_partition_sum(k) - (-1) ** k) for k in range(0, 9))
        return [ResidualReport("cumulants.alternating_sum", float(worst), 0.0, {"k_max": 8})]

    checks.append(("cumulants.alternating_sum", alternating))
    return checks


def _renamed(r: ResidualReport, name: str) -> ResidualReport:
    return ResidualReport(name, r.residual, r.tolerance, r.params, r.meta)


# ---------------------------------------------------------------------------
# bbgky
# ---------------------------------------------------------------------------


def _bbgky_finite(model, rng, opt: SuiteOptions) -> list[ResidualReport]:
    sp = model.space
    t = opt.t
    N = max(opt.s_max + 1, _max_ground(model))
    tol = opt.tol("bbgky.residual", 1e-8)
    D, F0, Ft = _closed_states(model, rng, N, t, opt.coefficients)
    out = []
    for s in range(1, opt.s_max + 1):
        d = solve_marginal_distributions(F0, s, t, model, derivative=True, coefficients=opt.coefficients)
        out.append(ResidualReport("bbgky.residual", max_abs(d - bbgky_rhs(Ft, s, model)), tol, _params(model, s=s, t=t, N=N)))
        start = solve_marginal_distributions(F0, s, 0.0, model, coefficients=opt.coefficients)
        out.append(_initial_value("bbgky.initial_value", model, start, F0.components[s], rng, s, opt, s=s, N=N))
    for s in range(1, opt.s_max + 1):
        a = solve_marginal_distributions(F0, s, t, model, coefficients=opt.coefficients)
        b = solve_marginals_reduced(F0, s, t, model)
        out.append(ResidualReport("bbgky.reduced_route", max_abs(a - b), opt.tol("bbgky.reduced_route", 1e-10), _params(model, s=s, t=t)))
        o = oracle_closed_system(ClosedSystem(N, D.components[N]), s, t, model)
        out.append(ResidualReport("bbgky.oracle", max_abs(a - o), opt.tol("bbgky.oracle", 1e-10), _params(model, s=s, t=t, N=N)))
        longer = solve_marginal_distributions(F0, s, t, model, n_term=N - s + 2, coefficients=opt.coefficients)
        out.append(ResidualReport("bbgky.closed_exactness", max_abs(longer - a), opt.tol("bbgky.closed_exactness", 1e-14), _params(model, s=s, t=t)))
    D0 = _random_sequence(sp, rng, opt.n_max, head=1.0, positive=True)
    out.append(_renamed(check_normalization_invariance(D0, t, model, opt.tol("normalization", 1e-10)), "bbgky.normalization"))
    return out


def _bbgky_continuous(model, rng, opt: SuiteOptions) -> list[ResidualReport]:
    out = []
    init = gaussian_closed_system(3)
    sp = model.space
    F0 = grand_canonical_marginals(init.sequence(sp))
    for t in (0.1, 1.0):
        for s in (1, 2):
            a = solve_marginal_distributions(F0, s, t, model, coefficients=opt.coefficients)
            o = oracle_closed_system(init, s, t, model)
            out.append(ResidualReport("bbgky.oracle", _residual(model, a, o, rng, s, 4, relative=True), opt.tol("bbgky.oracle_continuous", 1e-6), _params(model, s=s, t=t, N=3, relative=True)))
    t = 0.5
    Ft = _seq(sp, [sp.constant(0, 1.0)] + [solve_marginal_distributions(F0, s, t, model, coefficients=opt.coefficients) for s in (1, 2, 3)])
    for s in (1, 2):
        d = solve_marginal_distributions(F0, s, t, model, derivative=True, coefficients=opt.coefficients)
        out.append(ResidualReport("bbgky.residual", _residual(model, d, bbgky_rhs(Ft, s, model), rng, s, 3), opt.tol("residual_continuous", 1e-4), _params(model, s=s, t=t, N=3)))
        start = solve_marginal_distributions(F0, s, 0.0, model, coefficients=opt.coefficients)
        out.append(_initial_value("bbgky.initial_value", model, start, F0.components[s], rng, s, opt, s=s, N=3))
    D2 = gaussian_closed_system(2).sequence(sp)
    out.append(_renamed(check_normalization_invariance(D2, 1.0, model, opt.tol("normalization_continuous", 1e-6)), "bbgky.normalization"))
    return out


def _bbgky(model, rng, opt):
    return _bbgky_finite(model, rng, opt) if model.kind == "finite" else _bbgky_continuous(model, rng, opt)


# ---------------------------------------------------------------------------
# dual
# ---------------------------------------------------------------------------


def _dual_finite(model, rng, opt: SuiteOptions) -> list[ResidualReport]:
    sp = model.space
    t = opt.t
    S = opt.s_max
    out = []
    A0 = _random_sequence(sp, rng, S, head=0.3)
    B0 = marginal_observables_init(A0)
    Bt = _seq(sp, [B0.components[0]] + [solve_marginal_observables(B0, s, t, model, coefficients=opt.coefficients) for s in range(1, S + 1)], closed=False)
    for s in range(1, S + 1):
        d = solve_marginal_observables(B0, s, t, model, derivative=True, coefficients=opt.coefficients)
        out.append(ResidualReport("dual.residual", max_abs(d - dual_bbgky_rhs(Bt, s, model)), opt.tol("dual.residual", 1e-8), _params(model, s=s, t=t)))
        start = solve_marginal_observables(B0, s, 0.0, model, coefficients=opt.coefficients)
        out.append(_initial_value("dual.initial_value", model, start, B0.components[s], rng, s, opt, s=s))
        r = solve_marginal_observables(B0, s, t, model, reduced=True)
        out.append(ResidualReport("dual.reduced_route", max_abs(Bt.components[s] - r), opt.tol("dual.reduced_route", 1e-10), _params(model, s=s, t=t)))
    At = exp_create(Bt)
    worst = max(max_abs(At.components[n] - model.evolve(A0.components[n], t, [tuple(range(n))], OBSERVABLE)) for n in range(1, S + 1))
    out.append(ResidualReport("dual.observable_reconstruction", worst, opt.tol("dual.observable_reconstruction", 1e-10), _params(model, t=t)))

    # duality with closed-system states
    N = S
    _, F0, Ft = _closed_states(model, rng, N, t, opt.coefficients)
    Bt_closed = _seq(sp, list(Bt.components[: N + 1]))
    lhs = mean_value_pairing(Bt_closed, F0)
    rhs = mean_value_pairing(B0, Ft)
    out.append(ResidualReport("dual.duality", abs(lhs - rhs), opt.tol("dual.duality", 1e-8), _params(model, t=t, N=N), {"lhs": lhs, "rhs": rhs}))

    # additive-type observables
    a1 = sp.random_symmetric(1, rng)
    B1 = _seq(sp, [sp.zeros(0), a1])
    worst = 0.0
    for s in range(1, S + 1):
        total = sp.linear_combination([1.0] * s, [sp.product([(a1, (i,))], s) for i in range(s)], s)
        expect = cumulant(ClusterTuple.atoms(range(s)), t, OBSERVABLE, opt.coefficients).apply(total, model)
        worst = max(worst, max_abs(solve_marginal_observables(B1, s, t, model, coefficients=opt.coefficients) - expect))
    out.append(ResidualReport("dual.additive_type", worst, opt.tol("dual.additive_type", 1e-10), _params(model, t=t)))
    return out


def _dual_continuous(model, rng, opt: SuiteOptions) -> list[ResidualReport]:
    sp = model.space
    t = 0.5
    b1 = _gaussian(1, np.array([[0.2, -0.1]]), 0.7)
    b2 = _symmetric_gaussian(2, 0.3, -0.2)
    B0 = _seq(sp, [sp.constant(0, 0.4), b1, b2])
    Bt = _seq(sp, [B0.components[0]] + [solve_marginal_observables(B0, s, t, model, coefficients=opt.coefficients) for s in (1, 2)], closed=False)
    out = []
    for s in (1, 2):
        d = solve_marginal_observables(B0, s, t, model, derivative=True, coefficients=opt.coefficients)
        out.append(ResidualReport("dual.residual", _residual(model, d, dual_bbgky_rhs(Bt, s, model), rng, s), opt.tol("residual_continuous", 1e-4), _params(model, s=s, t=t)))
        start = solve_marginal_observables(B0, s, 0.0, model, coefficients=opt.coefficients)
        out.append(_initial_value("dual.initial_value", model, start, B0.components[s], rng, s, opt, s=s))
    return out


def _dual(model, rng, opt):
    return _dual_finite(model, rng, opt) if model.kind == "finite" else _dual_continuous(model, rng, opt)


# ---------------------------------------------------------------------------
# correlations
# ---------------------------------------------------------------------------


def _correlations_finite(model, rng, opt: SuiteOptions) -> list[ResidualReport]:
    sp = model.space
    t = opt.t
    S = opt.s_max + 1
    out = []
    D = _random_sequence(sp, rng, S + 2, scale=0.4, head=1.0, positive=True)
    g0 = ln_star(D)
    gt = _seq(sp, [sp.zeros(0)] + [solve_correlations(g0, s, t, model, coefficients=opt.coefficients) for s in range(1, S + 1)], closed=False)
    Dt = evolve_sequence(D, t, model)
    route = ln_star(Dt)
    for s in range(1, S + 1):
        d = solve_correlations(g0, s, t, model, derivative=True, coefficients=opt.coefficients)
        out.append(ResidualReport("correlations.residual", max_abs(d - liouville_hierarchy_rhs(gt, s, model)), opt.tol("correlations.residual", 1e-8), _params(model, s=s, t=t)))
        start = solve_correlations(g0, s, 0.0, model, coefficients=opt.coefficients)
        out.append(_initial_value("correlations.initial_value", model, start, g0.components[s], rng, s, opt, s=s))
        out.append(ResidualReport("correlations.distribution_route", max_abs(gt.components[s] - route.components[s]), opt.tol("correlations.distribution_route", 1e-10), _params(model, s=s, t=t)))
    order = 2
    Fg = {}
    for s in range(1, opt.s_max + 1):
        d_route = grand_canonical_marginals_by_order(Dt, s, order)
        Fg[s] = marginals_from_correlations(g0, s, t, model, n_term=order, by_order=True, coefficients=opt.coefficients)
        worst = max(max_abs(a - b) for a, b in zip(d_route, Fg[s]))
        out.append(ResidualReport("correlations.marginals", worst, opt.tol("correlations.marginals", 1e-8), _params(model, s=s, t=t, order=order)))
    for s in range(1, opt.s_max + 1):
        G = marginal_correlations_from_correlations(g0, s, t, model, n_term=order, by_order=True, coefficients=opt.coefficients)
        ln = graded_partition_sum(Fg, s, order, sp, signed=True)
        out.append(ResidualReport("correlations.marginal_correlations", max(max_abs(a - b) for a, b in zip(ln, G)), opt.tol("correlations.marginal_correlations", 1e-8), _params(model, s=s, t=t, order=order)))
    worst = 0.0
    for s in range(1, 3):
        for n in range(0, 3):
            a = cluster_correlation(g0, s, n)
            b = cluster_cumulant(D, ClusterTuple.with_cluster(s, n))
            worst = max(worst, max_abs(a - b))
    out.append(ResidualReport("correlations.cluster_argument", worst, opt.tol("correlations.cluster_argument", 1e-12), _params(model)))
    return out


def _correlations_continuous(model, rng, opt: SuiteOptions) -> list[ResidualReport]:
    sp = model.space
    t = 0.5
    g0 = _seq(sp, [sp.zeros(0), _symmetric_gaussian(1, 0.8, 0.3), _symmetric_gaussian(2, 0.2, -0.2)])
    gt = _seq(sp, [sp.zeros(0)] + [solve_correlations(g0, s, t, model, coefficients=opt.coefficients) for s in (1, 2)], closed=False)
    out = []
    for s in (1, 2):
        d = solve_correlations(g0, s, t, model, derivative=True, coefficients=opt.coefficients)
        out.append(ResidualReport("correlations.residual", _residual(model, d, liouville_hierarchy_rhs(gt, s, model), rng, s), opt.tol("residual_continuous", 1e-4), _params(model, s=s, t=t)))
        start = solve_correlations(g0, s, 0.0, model, coefficients=opt.coefficients)
        out.append(_initial_value("correlations.initial_value", model, start, g0.components[s], rng, s, opt, s=s))
    return out


def _correlations(model, rng, opt):
    return _correlations_finite(model, rng, opt) if model.kind == "finite" else _correlations_continuous(model, rng, opt)


# ---------------------------------------------------------------------------
# nonlinear
# ---------------------------------------------------------------------------


def _nonlinear_residual(model, G0, s_max: int, order: int, t: float, opt: SuiteOptions, rng, tol: float) -> list[ResidualReport]:
    general = set(model.interaction_orders) - {2} != set()
    pieces = {m: solve_marginal_correlations(G0, m, t, model, n_term=order, by_order=True, coefficients=opt.coefficients) for m in range(1, s_max + max((2,) + tuple(model.interaction_orders)))}
    out = []
    for s in range(1, s_max + 1):
        d = solve_marginal_correlations(G0, s, t, model, n_term=order, by_order=True, derivative=True, coefficients=opt.coefficients)
        terms = nonlinear_bbgky_terms(s, model, general=general)
        worst = 0.0
        for a in range(order + 1):
            rhs = evaluate_terms_by_order(terms, pieces, s, a, model)
            worst = max(worst, _residual(model, d[a], rhs, rng, s))
        out.append(ResidualReport("nonlinear.residual", worst, tol, _params(model, s=s, t=t, order=order), {"many_body": general}))
        start = solve_marginal_correlations(G0, s, 0.0, model, n_term=order, by_order=True, coefficients=opt.coefficients)
        expected = [G0.component(s)] + [model.space.zeros(s)] * order
        worst = max(_residual(model, a, b, rng, s) for a, b in zip(start, expected))
        out.append(ResidualReport("nonlinear.initial_value", worst, opt.tol("initial_value", 1e-12 if model.kind == "finite" else 1e-10), _params(model, s=s, t=0.0, order=order)))
    return out


def _nonlinear_finite(model, rng, opt: SuiteOptions) -> list[ResidualReport]:
    sp = model.space
    t = opt.t
    order = 2
    out = []
    G0 = _random_sequence(sp, rng, opt.s_max + order + max((2,) + tuple(model.interaction_orders)), scale=0.3)
    out += _nonlinear_residual(model, G0, min(2, opt.s_max), order, t, opt, rng, opt.tol("nonlinear.residual", 1e-8))
    F0 = exp_star(G0)
    Fp = {s: solve_marginal_distributions(F0, s, t, model, n_term=order, by_order=True, coefficients=opt.coefficients) for s in range(1, opt.s_max + 1)}
    Gp = {s: solve_marginal_correlations(G0, s, t, model, n_term=order, by_order=True, coefficients=opt.coefficients) for s in range(1, opt.s_max + 1)}
    for s in range(1, opt.s_max + 1):
        ex = graded_partition_sum(Gp, s, order, sp)
        out.append(ResidualReport("nonlinear.exp_star_route", max(max_abs(a - b) for a, b in zip(ex, Fp[s])), opt.tol("nonlinear.exp_star_route", 1e-8), _params(model, s=s, t=t, order=order)))
    G1 = sp.random_symmetric(1, rng, 0.5)
    chaos = _seq(sp, [sp.zeros(0), G1])
    worst = 0.0
    for total in range(1, 6 if sp.M <= 2 else 5):
        for s in range(1, total + 1):
            n = total - s
            U = nonlinear_reduced_cumulant(s, n, t, chaos, model, opt.coefficients)
            prod = sp.product([(G1, (i,)) for i in range(total)], total)
            expect = cumulant(ClusterTuple.atoms(range(total)), t, STATE, opt.coefficients).apply(prod, model)
            worst = max(worst, max_abs(U - expect))
    out.append(ResidualReport("nonlinear.chaos_reduction", worst, opt.tol("nonlinear.chaos_reduction", 1e-10), _params(model, t=t)))
    return out


def _nonlinear_continuous(model, rng, opt: SuiteOptions) -> list[ResidualReport]:
    sp = model.space
    G0 = _seq(sp, [sp.zeros(0), _symmetric_gaussian(1, 0.8, 0.3)])
    return _nonlinear_residual(model, G0, 1, 1, 0.5, opt, rng, opt.tol("residual_continuous", 1e-4))


def _nonlinear(model, rng, opt):
    return _nonlinear_finite(model, rng, opt) if model.kind == "finite" else _nonlinear_continuous(model, rng, opt)


# ---------------------------------------------------------------------------
# functional
# ---------------------------------------------------------------------------


def _functional(model, rng, opt: SuiteOptions) -> list[ResidualReport]:
    if model.kind != "finite":
        raise NotImplementedError("functional-derivative equations are verified on the finite model only")
    sp = model.space
    t = opt.t
    N = min(opt.n_max, 4)
    tol = opt.tol("functional", 1e-8)
    cf = opt.coefficients
    D = ClosedSystem(N, np.abs(sp.random_symmetric(N, rng)) + 0.05).sequence(sp)
    Dt = evolve_sequence(D, t, model)
    dDt = _seq(sp, [sp.zeros(0)] + [model.evolve_derivative(c, t, [tuple(range(n))]) for n, c in enumerate(D.components) if n])
    F0 = grand_canonical_marginals(D)
    Ft = _seq(sp, [sp.constant(0, 1.0)] + [solve_marginal_distributions(F0, s, t, model, coefficients=cf) for s in range(1, N + 1)])
    dFt = _seq(sp, [sp.zeros(0)] + [solve_marginal_distributions(F0, s, t, model, derivative=True, coefficients=cf) for s in range(1, N + 1)])
    g0 = _random_sequence(sp, rng, N, scale=0.3)
    gt = _seq(sp, [sp.zeros(0)] + [solve_correlations(g0, s, t, model, coefficients=cf) for s in range(1, N + 1)], closed=False)
    dgt = _seq(sp, [sp.zeros(0)] + [solve_correlations(g0, s, t, model, derivative=True, coefficients=cf) for s in range(1, N + 1)], closed=False)
    # marginal correlations as Ln* of the exactly solved closed-system marginals;
    # the order-one part of the graded Ln* of (F, dF/dt) is d/dt Ln* F
    depth = N + max((1,) + tuple(model.interaction_orders))
    Fpad = _seq(sp, list(Ft.components) + [sp.zeros(n) for n in range(N + 1, depth + 1)])
    dFpad = _seq(sp, list(dFt.components) + [sp.zeros(n) for n in range(N + 1, depth + 1)])
    Gt = ln_star(Fpad)
    pieces = {n: [Fpad.components[n], dFpad.components[n]] for n in range(1, depth + 1)}
    dGt = _seq(sp, [sp.zeros(0)] + [graded_partition_sum(pieces, s, 1, sp, signed=True)[1] for s in range(1, depth + 1)], closed=False)
    A0 = _random_sequence(sp, rng, N - 1, head=0.3)
    At = evolve_sequence(A0, t, model, OBSERVABLE)
    dAt = _seq(sp, [sp.zeros(0)] + [model.evolve_derivative(c, t, [tuple(range(n))], OBSERVABLE) for n, c in enumerate(A0.components) if n])
    B0 = marginal_observables_init(A0)
    Bt = _seq(sp, [B0.components[0]] + [solve_marginal_observables(B0, s, t, model, coefficients=cf) for s in range(1, N)], closed=False)
    dBt = _seq(sp, [sp.zeros(0)] + [solve_marginal_observables(B0, s, t, model, derivative=True, coefficients=cf) for s in range(1, N)], closed=False)
    families = {
        "liouville": (Dt, dDt),
        "bbgky": (Ft, dFt),
        "correlations": (gt, dgt),
        "marginal_correlations": (Gt, dGt),
        "observables": (At, dAt),
        "dual": (Bt, dBt),
    }
    out = []
    for i in range(5):
        u = rng.standard_normal(sp.M) * 0.7
        for name, (seq, dseq) in families.items():
            r = functional_equation_residual(seq, dseq, u, name, model, tol, params=_params(model, t=t, u_index=i))
            out.append(r)
    # u = 0 reduces every equation to the scalar component
    zero = np.zeros(sp.M)
    for name, (seq, dseq) in families.items():
        r = functional_equation_residual(seq, dseq, zero, name, model, opt.tol("functional.u0", 1e-10), params=_params(model, t=t, u_index="zero"))
        out.append(r)
    return out


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def suite_checks(name: str, model, opt: SuiteOptions) -> list[tuple[str, Check]]:
    if name == "cumulants":
        return _cumulant_checks(model, opt)
    table = {
        "algebra": _algebra,
        "bbgky": _bbgky,
        "dual": _dual,
        "correlations": _correlations,
        "nonlinear": _nonlinear,
        "functional": _functional,
    }
    if name not in table:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    return [(name, table[name])]


def run_suite(name: str, model, opt: SuiteOptions | None = None, threads: int | None = None) -> list[ResidualReport]:
    """Run one suite (or ``"all"``) and return its reports in deterministic order."""
    opt = opt or SuiteOptions()
    if name == "all":
        names = [n for n in SUITES if not (n == "functional" and model.kind != "finite")]
    else:
        names = [name]
    checks: list[tuple[str, Check]] = []
    for n in names:
        checks += suite_checks(n, model, opt)
    threads = threads or thread_cap()

    def run(item):
        check_id, fn = item
        return fn(model, _check_rng(opt.seed, check_id), opt)

    if threads <= 1 or len(checks) == 1:
        results = [run(c) for c in checks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, checks))
    reports = []
    for (check_id, _), rs in zip(checks, results):
        for r in rs:
            reports.append(ResidualReport(r.check, r.residual, r.tolerance, dict(r.params), dict(r.meta, check_id=check_id, seed=opt.seed)))
    return reports
