"""Risk-bounded multi-agent path finding on waypoint graphs."""

from .baselines import (
    ParetoPoint,
    lagrangian_search,
    pareto_search,
    prune_graph,
    pruned_graph_search,
    select_under_budget,
    solve_baseline,
)
from .bench import BenchConfig, RiskInterval, TrialRecord, calibrate_interval, delta_at, run_benchmark
from .cbs import (
    InvalidUtilityError,
    NoSolution,
    Solution,
    SolveError,
    SolveTimeout,
    initial_allocation,
    reallocate_budgets,
    solve,
)
from .collision import Conflict, MotionSegment, check_segment_pair, detect_collisions, quadratic_coefficients
from .graph import AgentTask, InvalidPathError, SolveRequest, TimedPath, WaypointGraph, path_risk, sum_of_costs
from .instances import Instance, build_synthetic_instance, synthetic_instance
from .lowlevel import Constraint, ConstraintTable, min_feasible_risk, min_risk_path, rba_star, scalarized_path

__all__ = [
    "AgentTask",
    "BenchConfig",
    "Conflict",
    "Constraint",
    "ConstraintTable",
    "Instance",
    "InvalidPathError",
    "InvalidUtilityError",
    "MotionSegment",
    "NoSolution",
    "ParetoPoint",
    "RiskInterval",
    "Solution",
    "SolveError",
    "SolveRequest",
    "SolveTimeout",
    "TimedPath",
    "TrialRecord",
    "WaypointGraph",
    "build_synthetic_instance",
    "calibrate_interval",
    "check_segment_pair",
    "delta_at",
    "detect_collisions",
    "initial_allocation",
    "lagrangian_search",
    "min_feasible_risk",
    "min_risk_path",
    "pareto_search",
    "path_risk",
    "prune_graph",
    "pruned_graph_search",
    "quadratic_coefficients",
    "rba_star",
    "reallocate_budgets",
    "run_benchmark",
    "scalarized_path",
    "select_under_budget",
    "solve",
    "solve_baseline",
    "sum_of_costs",
    "synthetic_instance",
]
