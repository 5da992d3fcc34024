"""Hierarchy right-hand sides, residual checks, oracles and identity suites."""

from ..reports import ResidualReport
from .functional import EQUATIONS, functional_equation_residual
from .hierarchies import (
    bbgky_rhs,
    dual_bbgky_rhs,
    evaluate_terms,
    evaluate_terms_by_order,
    liouville_hierarchy_rhs,
    nonlinear_bbgky_rhs,
    nonlinear_bbgky_terms,
)
from .oracles import check_normalization_invariance, duality_pairing, evolve_sequence, oracle_closed_system
from .suites import SUITES, SuiteOptions, continuous_model, finite_model, gaussian_closed_system, run_suite

__all__ = [
    "ResidualReport",
    "EQUATIONS",
    "functional_equation_residual",
    "bbgky_rhs",
    "dual_bbgky_rhs",
    "liouville_hierarchy_rhs",
    "nonlinear_bbgky_rhs",
    "nonlinear_bbgky_terms",
    "evaluate_terms",
    "evaluate_terms_by_order",
    "check_normalization_invariance",
    "duality_pairing",
    "evolve_sequence",
    "oracle_closed_system",
    "SUITES",
    "SuiteOptions",
    "run_suite",
    "finite_model",
    "continuous_model",
    "gaussian_closed_system",
]
