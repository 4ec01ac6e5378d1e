"""Safe sim-to-real policy transfer.

Evolve a goal-space repertoire of maximally-safe policies across randomized
simulated dynamics, then pick policies on the deployed system by Bayesian
optimization with an expected-safe-improvement acquisition, using the
simulated scores as Gaussian-process priors.
"""

from .adapt import (
    AdaptationLog,
    AdaptConfig,
    SelectionKind,
    adapt_loop,
    esi,
    expected_improvement,
    lcb,
    select_next,
    violation_bound,
)
from .evolve import EvolveConfig, evaluate_policy, map_elites, mutate, sample_dynamics
from .gp import GPHyper, GPModel, NearestNeighborPrior, gp_fit, gp_predict, se_kernel
from .repertoire import (
    GridSpec,
    InsertOutcome,
    Repertoire,
    RepertoireEntry,
    discretize,
)
from .trajectory import Trajectory

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig",
    "AdaptationLog",
    "EvolveConfig",
    "GPHyper",
    "GPModel",
    "GridSpec",
    "InsertOutcome",
    "NearestNeighborPrior",
    "Repertoire",
    "RepertoireEntry",
    "SelectionKind",
    "Trajectory",
    "adapt_loop",
    "discretize",
    "esi",
    "evaluate_policy",
    "expected_improvement",
    "gp_fit",
    "gp_predict",
    "lcb",
    "map_elites",
    "mutate",
    "sample_dynamics",
    "se_kernel",
    "select_next",
    "violation_bound",
]
