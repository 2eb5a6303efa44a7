"""Benchmarking toolkit for PON-based fronthaul network design.

Generates reproducible deployment scenarios, evaluates total cost of
ownership under latency and optical-budget constraints, and solves the
DU/splitter placement and RU assignment problem with an exact
brute-force oracle, an exportable integer model, and three heuristics.
"""
from .costing import (
    CONSTRAINT_IDS,
    check_solution,
    compute_tco,
    max_feasible_type,
    path_latency_us,
    path_loss_db,
)
from .generator import GeneratorConfig, generate_instance, grid_splitter_sites
from .ilp import (
    MilpModel,
    OracleLimits,
    brute_force_optimal,
    build_model,
    export_lp,
    import_solution,
)
from .presets import DEFAULT_CATALOG, SCENARIOS, get_scenario, physical_params_for
from .types import (
    CostBreakdown,
    CostCatalog,
    NetworkInstance,
    PhysicalParams,
    Point2D,
    RU,
    Scenario,
    Solution,
    onu_cost_for_demand,
    validate_instance,
)

__version__ = "0.1.0"

__all__ = [
    "CONSTRAINT_IDS",
    "CostBreakdown",
    "CostCatalog",
    "DEFAULT_CATALOG",
    "GeneratorConfig",
    "MilpModel",
    "NetworkInstance",
    "OracleLimits",
    "PhysicalParams",
    "Point2D",
    "RU",
    "SCENARIOS",
    "Scenario",
    "Solution",
    "brute_force_optimal",
    "build_model",
    "check_solution",
    "compute_tco",
    "export_lp",
    "generate_instance",
    "get_scenario",
    "grid_splitter_sites",
    "import_solution",
    "max_feasible_type",
    "onu_cost_for_demand",
    "path_latency_us",
    "path_loss_db",
    "physical_params_for",
    "validate_instance",
]
