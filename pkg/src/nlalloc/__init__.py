"""Distributed resource allocation under nonlinear actuation.

Agents on a time-varying network minimize a sum of local convex costs
subject to a weighted-sum resource constraint, using Laplacian-gradient
dynamics passed through an odd, sign-preserving actuation map.
"""

from .actuation import Actuation, compose, make_actuation, verify_sign_preserving
from .costs import (
    CostStack,
    LocalCost,
    LogSumExpQuadCost,
    PenalizedCost,
    QuadraticCost,
    make_agc_costs,
    make_f2_cost,
    penalize,
)
from .dynamics import (
    SimConfig,
    Trajectory,
    feasibility_residual,
    gradient_consensus_residual,
    lyapunov_residual,
    project_feasible,
    rhs,
    simulate,
    step,
    sum_identity_gap,
)
from .errors import (
    AllocError,
    ConfigError,
    DegenerateCouplingError,
    DimensionError,
    IntegrationError,
    ParameterError,
    PreconditionError,
    UnboundedGradientError,
)
from .netgraph import (
    GraphSchedule,
    WeightedGraph,
    algebraic_connectivity,
    build_complete,
    build_cycle,
    build_erdos_renyi,
    build_switching_erdos_renyi,
    check_uniform_connectivity,
    is_connected,
)
from .oracle import KktSolution, optimal_value_trace, solve_kkt
from .problem import AllocationProblem, make_problem

__version__ = "0.1.0"

__all__ = [
    "Actuation",
    "compose",
    "make_actuation",
    "verify_sign_preserving",
    "CostStack",
    "LocalCost",
    "LogSumExpQuadCost",
    "PenalizedCost",
    "QuadraticCost",
    "make_agc_costs",
    "make_f2_cost",
    "penalize",
    "SimConfig",
    "Trajectory",
    "feasibility_residual",
    "gradient_consensus_residual",
    "lyapunov_residual",
    "project_feasible",
    "rhs",
    "simulate",
    "step",
    "sum_identity_gap",
    "AllocError",
    "ConfigError",
    "DegenerateCouplingError",
    "DimensionError",
    "IntegrationError",
    "ParameterError",
    "PreconditionError",
    "UnboundedGradientError",
    "GraphSchedule",
    "WeightedGraph",
    "algebraic_connectivity",
    "build_complete",
    "build_cycle",
    "build_erdos_renyi",
    "build_switching_erdos_renyi",
    "check_uniform_connectivity",
    "is_connected",
    "KktSolution",
    "optimal_value_trace",
    "solve_kkt",
    "AllocationProblem",
    "make_problem",
]
