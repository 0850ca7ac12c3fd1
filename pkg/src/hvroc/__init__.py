"""Stochastic human-machine reaching: human model, automation tuning,
exact moment propagation, and a Monte-Carlo oracle.

The package solves a finite-horizon stochastic optimal control model of
human reaching (signal-dependent noise in action and perception),
derives deterministic LQG automations that share the plant with the
human, propagates the exact means and covariances of the coupled loop,
and tunes the automation's cost parameters against human-variability
objectives.  The `hvroc` CLI reproduces two bundled reach scenarios.
"""

from .config import (
    BUNDLED_CONFIGS,
    CONTROLLER_LABELS,
    ConfigError,
    ScenarioConfig,
    bundled_config_text,
    load_bundled_config,
    load_config,
    parse_config,
)
from .hvroc_opt import (
    DEFAULT_INIT,
    DEFAULT_OBSERVER_INTENSITY,
    HumanBaseline,
    ObjectiveWeights,
    OptimizationFailedError,
    OptimizationResult,
    evaluate_objective,
    human_baseline,
    optimize,
    resolve_preset,
    scalarize_variance,
)
from .lqg_automation import (
    AutomationParams,
    AutomationPolicy,
    DegenerateCostError,
    build_automation,
    disturbance_observer,
    solve_lqr,
    solve_observer,
)
from .lqs_human import (
    HumanPolicy,
    SolverDegenerateError,
    SolverReport,
    control_pass,
    filter_pass,
    solve_lqs,
)
from .mc_oracle import EnsembleStats, sample_cost, simulate
from .model import (
    CostSpec,
    IDX_ACT,
    IDX_FORCE,
    IDX_POS,
    IDX_REF,
    IDX_VEL,
    InvalidCostError,
    InvalidTaskError,
    N_AUGMENTED,
    N_PHYSICAL,
    PlantModel,
    ReachTask,
    build_point_mass_plant,
    materialize_reference_cost,
    reference_cost_matrix,
)
from .moments import (
    MomentTrajectory,
    PositionStats,
    position_stats,
    propagate_coupled,
    propagate_human_alone,
    reference_error,
    settling_time,
)

__version__ = "0.1.0"

__all__ = [
    "AutomationParams",
    "AutomationPolicy",
    "BUNDLED_CONFIGS",
    "CONTROLLER_LABELS",
    "ConfigError",
    "CostSpec",
    "DEFAULT_INIT",
    "DEFAULT_OBSERVER_INTENSITY",
    "DegenerateCostError",
    "EnsembleStats",
    "HumanBaseline",
    "HumanPolicy",
    "IDX_ACT",
    "IDX_FORCE",
    "IDX_POS",
    "IDX_REF",
    "IDX_VEL",
    "InvalidCostError",
    "InvalidTaskError",
    "MomentTrajectory",
    "N_AUGMENTED",
    "N_PHYSICAL",
    "ObjectiveWeights",
    "OptimizationFailedError",
    "OptimizationResult",
    "PlantModel",
    "PositionStats",
    "ReachTask",
    "ScenarioConfig",
    "SolverDegenerateError",
    "SolverReport",
    "build_automation",
    "build_point_mass_plant",
    "bundled_config_text",
    "control_pass",
    "disturbance_observer",
    "evaluate_objective",
    "filter_pass",
    "human_baseline",
    "load_bundled_config",
    "load_config",
    "materialize_reference_cost",
    "optimize",
    "parse_config",
    "position_stats",
    "propagate_coupled",
    "propagate_human_alone",
    "reference_cost_matrix",
    "reference_error",
    "resolve_preset",
    "sample_cost",
    "scalarize_variance",
    "settling_time",
    "simulate",
    "solve_lqr",
    "solve_lqs",
    "solve_observer",
    "__version__",
]
