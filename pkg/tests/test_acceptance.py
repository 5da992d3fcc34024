"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
"""

import time
from dataclasses import dataclass

import numpy as np
import pytest

from hierarchy_lab.cumulants import perturbed_mobius
from hierarchy_lab.numerics import max_abs
from hierarchy_lab.solvers import grand_canonical_marginals, solve_marginal_distributions
from hierarchy_lab.verification import (
    check_normalization_invariance,
    SuiteOptions,
    continuous_model,
    finite_model,
    gaussian_closed_system,
    oracle_closed_system,
    run_suite,
)

SEEDS = (0, 1, 2)


@dataclass
class Outcome:
    checks: list[tuple[str, float, float]]

    @property
    def failures(self) -> list[tuple[str, float, float]]:
        return [c for c in self.checks if not c[1] <= c[2]]

    @property
    def passed(self) -> bool:
        return bool(self.checks) and not self.failures

    def worst(self) -> str:
        name, res, tol = max(self.checks, key=lambda c: c[1] / c[2] if c[2] > 0 else (np.inf if c[1] > 0 else 0.0))
        return f"worst {name} {res:.2e} (tol {tol:.0e})"


def _collect(reports, tol: dict[str, float] | None = None, select=None) -> list[tuple[str, float, float]]:
    out = []
    for r in reports:
        if select is not None and not select(r.check):
            continue
        limit = r.tolerance if tol is None else tol.get(r.check, r.tolerance)
        out.append((r.check, r.residual, limit))
    return out


# -- criteria -----------------------------------------------------------------------


def criterion_1(coefficients=None) -> Outcome:
    checks = []
    for seed in SEEDS:
        reports = run_suite("algebra", finite_model(seed), SuiteOptions(seed=seed, n_max=5))
        checks += [(r.check, r.residual, 1e-12) for r in reports]
    return Outcome(checks)


def criterion_2(coefficients=None) -> Outcome:
    model = finite_model(0, M=2)
    reports = run_suite("cumulants", model, SuiteOptions(seed=0, coefficients=coefficients))
    sizes = {r.params.get("s", 0) + r.params.get("n", 0) for r in reports if r.check == "cumulants.cluster_expansion"}
    checks = [(r.check, r.residual, 0.0 if r.check == "cumulants.alternating_sum" else 1e-10) for r in reports]
    checks.append(("cumulants.max_ground_size", float(6 - max(sizes)), 0.0))
    return Outcome(checks)


def criterion_3(coefficients=None) -> Outcome:
    model = continuous_model(nodes=20)
    init = gaussian_closed_system(3)
    F0 = grand_canonical_marginals(init.sequence(model.space))
    rng = np.random.default_rng(3)
    checks = []
    for t in (0.1, 1.0):
        for s in (1, 2):
            X = model.space.random_points(s, 8, rng)
            got = solve_marginal_distributions(F0, s, t, model, coefficients=coefficients)(X)
            ref = oracle_closed_system(init, s, t, model)(X)
            checks.append((f"oracle s={s} t={t}", max_abs(got - ref) / max_abs(ref), 1e-6))
    return Outcome(checks)


def criterion_4(coefficients=None) -> Outcome:
    tol = {"bbgky.reduced_route": 1e-10, "nonlinear.exp_star_route": 1e-8, "correlations.marginals": 1e-8}
    checks = []
    for seed in SEEDS:
        model = finite_model(seed)
        opt = SuiteOptions(seed=seed, s_max=3, coefficients=coefficients)
        for suite in ("bbgky", "nonlinear", "correlations"):
            checks += _collect(run_suite(suite, model, opt), tol, lambda c: c in tol)
    return Outcome(checks)


RESIDUALS = ("bbgky.residual", "correlations.residual", "nonlinear.residual", "dual.residual")
INITIAL = ("bbgky.initial_value", "correlations.initial_value", "nonlinear.initial_value", "dual.initial_value")


def criterion_5(coefficients=None, continuous: bool = True) -> Outcome:
    """Hierarchy residuals of solved families, together with their initial values."""
    suites = ("bbgky", "correlations", "nonlinear", "dual")
    wanted = RESIDUALS + INITIAL
    checks = []
    for seed in SEEDS:
        model = finite_model(seed)
        opt = SuiteOptions(seed=seed, coefficients=coefficients)
        for suite in suites:
            checks += _collect(run_suite(suite, model, opt), {c: 1e-8 for c in RESIDUALS}, lambda c: c in wanted)
    if continuous:
        model = continuous_model()
        opt = SuiteOptions(seed=0, coefficients=coefficients)
        for suite in suites:
            checks += _collect(run_suite(suite, model, opt), {c: 1e-4 for c in RESIDUALS}, lambda c: c in wanted)
    return Outcome(checks)


def criterion_6(coefficients=None) -> Outcome:
    wanted = {"functional:bbgky", "functional:correlations", "functional:marginal_correlations", "functional:dual"}
    checks = []
    for seed in SEEDS:
        reports = run_suite("functional", finite_model(seed), SuiteOptions(seed=seed, coefficients=coefficients))
        random_u = [r for r in reports if r.check in wanted and r.params.get("u_index") != "zero"]
        checks += [(r.check, r.residual, 1e-8) for r in random_u]
        checks.append(("functional.test_functions", float(5 - len({r.params["u_index"] for r in random_u})), 0.0))
    return Outcome(checks)


def criterion_7(coefficients=None) -> Outcome:
    checks = []
    for seed in SEEDS:
        model = finite_model(seed)
        opt = SuiteOptions(seed=seed, coefficients=coefficients)
        checks += _collect(run_suite("dual", model, opt), {"dual.duality": 1e-8}, lambda c: c == "dual.duality")
        checks += _collect(run_suite("bbgky", model, opt), {"bbgky.normalization": 1e-10}, lambda c: c == "bbgky.normalization")
    D2 = gaussian_closed_system(2).sequence(continuous_model().space)
    r = check_normalization_invariance(D2, 1.0, continuous_model())
    checks.append(("normalization continuous", r.residual, 1e-6))
    return Outcome(checks)


def criterion_8(coefficients=None) -> Outcome:
    checks = []
    for seed in SEEDS:
        reports = run_suite("nonlinear", finite_model(seed), SuiteOptions(seed=seed, coefficients=coefficients))
        checks += _collect(reports, {"nonlinear.chaos_reduction": 1e-10}, lambda c: c == "nonlinear.chaos_reduction")
    return Outcome(checks)


def criterion_9(coefficients=None) -> Outcome:
    """Each single-coefficient perturbation must make criteria 2 and 5 fail."""
    checks = []
    for blocks in range(1, 7):
        rule = perturbed_mobius(blocks, 1e-3)
        c2 = criterion_2(rule)
        c5 = criterion_5(rule, continuous=False)
        checks.append((f"blocks={blocks} criterion 2 survived", float(c2.passed), 0.0))
        checks.append((f"blocks={blocks} criterion 5 survived", float(c5.passed), 0.0))
    return Outcome(checks)


CRITERIA = {
    1: ("algebra suite", criterion_1, 30.0),
    2: ("Mobius inversion", criterion_2, 120.0),
    3: ("closed-system oracle, harmonic chain", criterion_3, 120.0),
    4: ("solver equivalences", criterion_4, None),
    5: ("hierarchy residuals", criterion_5, None),
    6: ("functional-derivative equations", criterion_6, None),
    7: ("duality and conservation", criterion_7, None),
    8: ("chaos reduction", criterion_8, None),
    9: ("mutation test", criterion_9, None),
}


def evaluate(number: int) -> tuple[bool, str]:
    title, fn, limit = CRITERIA[number]
    start = time.perf_counter()
    outcome = fn()
    elapsed = time.perf_counter() - start
    ok = outcome.passed and (limit is None or elapsed < limit)
    detail = f"{len(outcome.checks)} checks, {outcome.worst()}, {elapsed:.1f}s"
    if limit is not None:
        detail += f" (limit {limit:.0f}s)"
    if outcome.failures:
        detail += f", failing: {[c[0] for c in outcome.failures][:4]}"
    return ok, f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}: {detail}"


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    ok, line = evaluate(number)
    with capsys.disabled():
        print(f"\n{line}")
    assert ok, line


if __name__ == "__main__":
    import sys

    results = [evaluate(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
