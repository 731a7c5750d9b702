"""gaplab - optimality gaps of asymptotic staffing prescriptions."""

from .lab import GapLab, MODELS, run_gap_table, run_approx_check, run_constrained_report
from .registry import ModelBundle, ModelEntry, ModelRegistry
from .config import ExperimentConfig, load_config
from .exact_queues import (
    CostParams,
    ExactOptimum,
    QueueParams,
    erlang_a_distribution,
    erlang_a_expected_queue,
    erlang_a_optimal_integer,
    erlang_c_integer,
    erlang_c_real,
    mmn_cost,
    mmn_expected_queue,
    mmn_min_servers_wait_prob,
    mmn_optimal,
)
from .expansions import (
    ExpansionSpec,
    ExponentialPatience,
    HyperexponentialPatience,
    PatienceDist,
    RhoConvention,
    constrained_expansion,
    erlang_a_diffusion_expansion,
    fluid_expansion,
    hw_expansion,
)
from .prescription import (
    GapRecord,
    Prescription,
    RateFit,
    epsilon_probe,
    optimality_gap,
    probe_conditions,
    rate_fit,
    refined_prescription,
    select_prescription,
    staffing,
)
from .errors import (
    GapLabError,
    DomainError,
    ConvergenceError,
    BracketError,
    UnboundedBelowError,
    InstabilityError,
    DegenerateObjectiveError,
    WindowTooSmallError,
    RegimeError,
    OptimizationError,
    ConditionViolationError,
    InsufficientDataError,
    UnknownModelError,
    ConfigError,
)

__version__ = "0.1.0"
__all__ = [
    # Main classes
    "GapLab",
    "MODELS",
    "ModelBundle",
    "ModelEntry",
    "ModelRegistry",
    "ExperimentConfig",
    "load_config",
    # Experiments
    "run_gap_table",
    "run_approx_check",
    "run_constrained_report",
    # Exact evaluators
    "QueueParams",
    "CostParams",
    "ExactOptimum",
    "erlang_c_integer",
    "erlang_c_real",
    "mmn_expected_queue",
    "mmn_cost",
    "mmn_optimal",
    "erlang_a_distribution",
    "erlang_a_expected_queue",
    "erlang_a_optimal_integer",
    "mmn_min_servers_wait_prob",
    # Expansions
    "ExpansionSpec",
    "PatienceDist",
    "ExponentialPatience",
    "HyperexponentialPatience",
    "RhoConvention",
    "hw_expansion",
    "fluid_expansion",
    "erlang_a_diffusion_expansion",
    "constrained_expansion",
    # Prescriptions
    "Prescription",
    "GapRecord",
    "RateFit",
    "select_prescription",
    "refined_prescription",
    "staffing",
    "optimality_gap",
    "epsilon_probe",
    "rate_fit",
    "probe_conditions",
    # Exceptions
    "GapLabError",
    "DomainError",
    "ConvergenceError",
    "BracketError",
    "UnboundedBelowError",
    "InstabilityError",
    "DegenerateObjectiveError",
    "WindowTooSmallError",
    "RegimeError",
    "OptimizationError",
    "ConditionViolationError",
    "InsufficientDataError",
    "UnknownModelError",
    "ConfigError",
]
