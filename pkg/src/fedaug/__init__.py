"""Planner and simulator for data-augmented federated learning at the edge.

Public API re-exports: learning-curve model and fitting, scenario and cost
models, the two inner resource solvers, the cross-entropy top layer, the
category augmentation split, and the experiment harness.
"""

from .augmentation import (
    CategoryAllocation,
    data_entropy,
    integerize,
    optimal_augmentation,
    solve_p8,
)
from .ce_optimizer import (
    CEConfig,
    POLICIES,
    complexity_report,
    eta_bounds,
    evaluate_split,
    solve_p1,
    validate_allocation,
)
from .errors import (
    ConfigError,
    DegenerateFit,
    DeviceInfeasible,
    InfeasibleBandwidth,
    InfeasibleBudget,
    NoFeasibleRegion,
    PlannerError,
    PolicyInfeasible,
)
from .harness import (
    NOT_REACHED,
    NotReached,
    Trajectory,
    gradient_similarity,
    metrics_at_target,
    oracle_p3,
    oracle_p4,
    run_policy,
)
from .learning_curve import (
    CurveParams,
    FitResult,
    FitSample,
    error_budget,
    fit_power_law,
    global_error,
    local_error,
    required_mixed_size,
    rounds_to_error,
)
from .solver_comm import (
    CommSolution,
    CommSubproblem,
    build_comm_subproblem,
    lambert_w,
    min_bandwidth,
    min_bandwidth_lambert,
    solve_p4,
)
from .solver_compute import (
    ComputeSolution,
    ComputeSubproblem,
    build_compute_subproblem,
    delta_bounds,
    solve_p3,
)
from .system_model import (
    Allocation,
    DeviceAllocation,
    DeviceProfile,
    Scenario,
    ScenarioConfig,
    generate_scenario,
    round_metrics,
    scenario_from_json,
    scenario_to_json,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "CEConfig",
    "CategoryAllocation",
    "CommSolution",
    "CommSubproblem",
    "ComputeSolution",
    "ComputeSubproblem",
    "ConfigError",
    "CurveParams",
    "DegenerateFit",
    "DeviceAllocation",
    "DeviceInfeasible",
    "DeviceProfile",
    "FitResult",
    "FitSample",
    "InfeasibleBandwidth",
    "InfeasibleBudget",
    "NOT_REACHED",
    "NoFeasibleRegion",
    "NotReached",
    "POLICIES",
    "PlannerError",
    "PolicyInfeasible",
    "Scenario",
    "ScenarioConfig",
    "Trajectory",
    "build_comm_subproblem",
    "build_compute_subproblem",
    "complexity_report",
    "data_entropy",
    "delta_bounds",
    "error_budget",
    "eta_bounds",
    "evaluate_split",
    "fit_power_law",
    "generate_scenario",
    "global_error",
    "gradient_similarity",
    "integerize",
    "lambert_w",
    "local_error",
    "metrics_at_target",
    "min_bandwidth",
    "min_bandwidth_lambert",
    "optimal_augmentation",
    "oracle_p3",
    "oracle_p4",
    "required_mixed_size",
    "round_metrics",
    "rounds_to_error",
    "run_policy",
    "scenario_from_json",
    "scenario_to_json",
    "solve_p1",
    "solve_p3",
    "solve_p4",
    "solve_p8",
    "validate_allocation",
]
