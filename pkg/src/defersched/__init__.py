"""Optimal and selfish scheduling of deferrable service under quadratic costs."""

from .model import (TOL, ConvergenceError, DomainError, GeneralDemandTable, ModelParams,
                    SequencePair)
from .nash_core import (NashLimits, agent_cost, best_response, deviation_cost, nash_limits,
                        nash_policy, tilde_sequence)
from .piecewise import PiecewisePolicy, Segment, SegmentKind, Source, UnresolvedPolicyError
from .policy_core import (Regime, approximate_policy, bar_limits, bar_sequence,
                          constrained_argmin, general_demand_policy, optimal_policy, regime, theta)
from .simulator import (PoAEstimate, SimulationReport, average_cost_sweep, pending_distribution,
                        pending_path, price_of_anarchy, simulate, total_variation)
from .vi_oracle import (Grid, TabularSolution, bellman_operator, bellman_residual, k_stage,
                        nash_value_iteration, policy_evaluation, value_iteration)

__version__ = "0.1.0"

__all__ = [
    "TOL",
    "ConvergenceError",
    "DomainError",
    "GeneralDemandTable",
    "ModelParams",
    "SequencePair",
    "NashLimits",
    "agent_cost",
    "best_response",
    "deviation_cost",
    "nash_limits",
    "nash_policy",
    "tilde_sequence",
    "PiecewisePolicy",
    "Segment",
    "SegmentKind",
    "Source",
    "UnresolvedPolicyError",
    "Regime",
    "approximate_policy",
    "bar_limits",
    "bar_sequence",
    "constrained_argmin",
    "general_demand_policy",
    "optimal_policy",
    "regime",
    "theta",
    "PoAEstimate",
    "SimulationReport",
    "average_cost_sweep",
    "pending_distribution",
    "pending_path",
    "price_of_anarchy",
    "simulate",
    "total_variation",
    "Grid",
    "TabularSolution",
    "bellman_operator",
    "bellman_residual",
    "k_stage",
    "nash_value_iteration",
    "policy_evaluation",
    "value_iteration",
]
