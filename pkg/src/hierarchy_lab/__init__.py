"""Cluster-expansion solutions of particle hierarchies with executable checks.

The package is organized bottom up: set-partition combinatorics, graded
sequences and their algebra, finite and continuous dynamics, cumulants of
evolution groups, expansion solvers for each hierarchy, and verification
suites that test the solvers against independent references.
"""

from .combinatorics import ClusterTuple, enumerate_partitions, mobius_coefficient, set_partitions
from .config import ConfigError, RunConfig, load_config
from .cumulants import CumulantOperator, cumulant, nonlinear_reduced_cumulant, perturbed_mobius, reduced_cumulant
from .dynamics import OBSERVABLE, STATE, ContinuousModel, FiniteLiouvillian, FiniteModel, Hamiltonian, HarmonicPair
from .reports import ResidualReport
from .sequence_algebra import GradedSequence, exp_star, ln_star, mean_value_pairing, star_product
from .solvers import (
    Chaos,
    ClosedSystem,
    Explicit,
    GrandCanonical,
    TruncationSpec,
    grand_canonical_marginals,
    solve_correlations,
    solve_marginal_correlations,
    solve_marginal_distributions,
    solve_marginal_observables,
)
from .spaces import ContinuousPhase, FinitePhase, PhaseFunction

__version__ = "0.1.0"

__all__ = [
    "ClusterTuple",
    "enumerate_partitions",
    "mobius_coefficient",
    "set_partitions",
    "ConfigError",
    "RunConfig",
    "load_config",
    "CumulantOperator",
    "cumulant",
    "nonlinear_reduced_cumulant",
    "perturbed_mobius",
    "reduced_cumulant",
    "OBSERVABLE",
    "STATE",
    "ContinuousModel",
    "FiniteLiouvillian",
    "FiniteModel",
    "Hamiltonian",
    "HarmonicPair",
    "ResidualReport",
    "GradedSequence",
    "exp_star",
    "ln_star",
    "mean_value_pairing",
    "star_product",
    "Chaos",
    "ClosedSystem",
    "Explicit",
    "GrandCanonical",
    "TruncationSpec",
    "grand_canonical_marginals",
    "solve_correlations",
    "solve_marginal_correlations",
    "solve_marginal_distributions",
    "solve_marginal_observables",
    "ContinuousPhase",
    "FinitePhase",
    "PhaseFunction",
]
