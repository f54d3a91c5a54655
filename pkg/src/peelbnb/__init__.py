"""Exact l0-penalized least squares by branch-and-bound with safe peeling.

Safe peeling tightens the per-coordinate box bounds at every node of the
search tree using Fenchel-dual certificates, strengthening the convex
relaxations used for pruning without ever changing the optimum.
"""

from ._kernels import backend_name
from .bnb import BnbConfig, Incumbent, SolveReport, branch, prune_test, solve, update_incumbent
from .dual import DualEvaluation, conjugate_box_const, conjugate_box_linear, dual_objective, pivot
from .instance import (
    BoxBounds,
    ExperimentConfig,
    GroundTruth,
    ProblemInstance,
    calibrate_bigM,
    generate_dictionary,
    generate_ground_truth,
    generate_observation,
    lambda_grid,
    lambda_max,
    load_instance,
    objective_P,
    save_instance,
)
from .oracle import OracleResult, brute_force_global, brute_force_node
from .peel import PeelOutcome, PeelTrace, peel_all, peel_lower, peel_upper, psi_lower, psi_upper
from .relax import NodePartition, RelaxationResult, coordinate_update, relax_objective, solve_relaxation

__version__ = "0.1.0"

__all__ = [
    "backend_name",
    "BnbConfig",
    "Incumbent",
    "SolveReport",
    "branch",
    "prune_test",
    "solve",
    "update_incumbent",
    "DualEvaluation",
    "conjugate_box_const",
    "conjugate_box_linear",
    "dual_objective",
    "pivot",
    "BoxBounds",
    "ExperimentConfig",
    "GroundTruth",
    "ProblemInstance",
    "calibrate_bigM",
    "generate_dictionary",
    "generate_ground_truth",
    "generate_observation",
    "lambda_grid",
    "lambda_max",
    "load_instance",
    "objective_P",
    "save_instance",
    "OracleResult",
    "brute_force_global",
    "brute_force_node",
    "PeelOutcome",
    "PeelTrace",
    "peel_all",
    "peel_lower",
    "peel_upper",
    "psi_lower",
    "psi_upper",
    "NodePartition",
    "RelaxationResult",
    "coordinate_update",
    "relax_objective",
    "solve_relaxation",
    "__version__",
]
