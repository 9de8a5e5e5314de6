"""Distributed weighted least squares on sensor networks.

Message passing (:mod:`dwls.engine`), the centralized reference
(:mod:`dwls.oracle`), graph unrolling into chains (:mod:`dwls.transforms`),
explicit accuracy bounds (:mod:`dwls.bounds`) and an experiment driver
(:mod:`dwls.harness`).
"""

from .bounds import CovBoundReport, EstBoundReport, covariance_bound, estimate_bound, increment_bounds
from .engine import InitSet, Message, NodeBelief, SingularityError, Trajectory, run, standard_inits, step
from .linalg import (
    BandedBlockSystem,
    banded_decay_bound,
    demko_decay_bound,
    first_block_row_inverse,
    riemannian_distance,
)
from .network import (
    UNBOUNDED,
    GraphStats,
    JointMeasurement,
    SelfMeasurement,
    SensorNetwork,
    Unbounded,
    ValidationError,
    graph_stats,
    loop_free_depth,
    validate,
)
from .oracle import GlobalSystem, solve, solve_line, solve_restricted
from .transforms import ComputationTree, LineSystem, collapse_to_line, layered_line, unroll

__all__ = [
    "BandedBlockSystem", "ComputationTree", "CovBoundReport", "EstBoundReport", "GlobalSystem",
    "GraphStats", "InitSet", "JointMeasurement", "LineSystem", "Message", "NodeBelief",
    "SelfMeasurement", "SensorNetwork", "SingularityError", "Trajectory", "UNBOUNDED", "Unbounded",
    "ValidationError", "banded_decay_bound", "collapse_to_line", "covariance_bound",
    "demko_decay_bound", "estimate_bound", "first_block_row_inverse", "graph_stats",
    "increment_bounds", "layered_line", "loop_free_depth", "riemannian_distance", "run", "solve",
    "solve_line", "solve_restricted", "standard_inits", "step", "unroll", "validate",
]
