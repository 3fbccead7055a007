"""Turn-back (crankback) routing analysis under a hard delay budget.

A packet crossing an n-hop path of i.i.d. normal hop delays turns back at
any intermediate node where the remaining hops are too likely to overrun
the residual budget.  This package computes the per-node turn-back
probabilities (analytically and by simulation), optimizes the turn-back
threshold for a required success probability, and models the travel
distance wasted by retries.
"""

from .gaussian import NormalParams, cdf, ccdf, inv_ccdf, pdf
from .analysis import (
    Scenario,
    ScenarioError,
    ThresholdTable,
    ReturnProfile,
    thresholds,
    decision_rule,
    return_profile_quadrature,
    return_profile_grid,
    approx_profile,
    success_probability,
)
from .simulate import (
    SimConfig,
    SimReport,
    NoSuccessError,
    simulate_profile,
    simulate_baseline,
    simulate_attempts,
)
from .planner import (
    AttemptModel,
    WasteReport,
    OptimizeResult,
    OptimizeError,
    optimize_ptr,
    attempt_distribution,
    waste_per_attempt,
    expected_total_distance,
    waste_per_success,
    waste_report,
)
from .scenario_io import (
    ScenarioFileError,
    load_scenario,
    write_report,
    read_report,
    GoldenValue,
    GoldenTable,
    golden_tables,
)

__version__ = "0.1.0"

__all__ = [
    "NormalParams", "pdf", "cdf", "ccdf", "inv_ccdf",
    "Scenario", "ScenarioError", "ThresholdTable", "ReturnProfile",
    "thresholds", "decision_rule", "return_profile_quadrature",
    "return_profile_grid", "approx_profile", "success_probability",
    "SimConfig", "SimReport", "NoSuccessError",
    "simulate_profile", "simulate_baseline", "simulate_attempts",
    "AttemptModel", "WasteReport", "OptimizeResult", "OptimizeError",
    "optimize_ptr", "attempt_distribution", "waste_per_attempt",
    "expected_total_distance", "waste_per_success", "waste_report",
    "ScenarioFileError", "load_scenario", "write_report", "read_report",
    "GoldenValue", "GoldenTable", "golden_tables",
    "__version__",
]
