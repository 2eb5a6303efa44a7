"""Built-in scenario and parameter presets.

Four named deployment scenarios plus a shared cost catalog and
physical constants. Presets can be overridden by JSON documents with
the same field names.
"""
from __future__ import annotations

import hashlib
import math

from .types import CostCatalog, PhysicalParams, Scenario, canonical_json

__all__ = [
    "DEFAULT_CATALOG",
    "SCENARIOS",
    "get_scenario",
    "physical_params_for",
    "scenario_digest",
    "splitter_types_for",
]

DEFAULT_CATALOG = CostCatalog(
    c_df=2000.0,
    c_ff=3000.0,
    c_tr=16000.0,
    c_bp=135000.0,
    c_rent=10000.0,
    c_m=0.10,
    c_p=1.5,
    t_op=20.0,
    onu_rates=(1.0, 2.5, 10.0),
    onu_costs=(100.0, 200.0, 400.0),
    splitter_cost_base=5000.0,
    splitter_cost_per_level=70.0,
    p_cool=500.0,
    p_du=100.0,
    p_ru=60.0,
    p_onu=4.0,
)

N_RU_MAX = 64
V_FIBER_M_S = 2.0e8
L_FIB_DB_KM = 0.25
L_FIX_DB = 3.0
L_MARGIN_DB = 2.0
L_BUDGET_DB = 32.0
SPLIT_LOSS_DB_PER_LEVEL = 3.5

SCENARIOS: dict[str, Scenario] = {
    "s1": Scenario(
        name="ubiquitous-connectivity",
        bw_per_ru=1.0,
        t_proc_us=300.0,
        t_fh_us=5000.0,
        max_split_ratio=64,
        map_side_m=20000.0,
        nd_sweep=(1, 2, 3, 5, 10),
        nr_sweep=(20, 50, 100, 200),
        splitter_spacing_m=2000.0,
    ),
    "s2": Scenario(
        name="low-latency",
        bw_per_ru=2.0,
        t_proc_us=25.0,
        t_fh_us=100.0,
        max_split_ratio=8,
        map_side_m=5000.0,
        nd_sweep=(2, 4, 6, 10, 15),
        nr_sweep=(20, 50, 100, 150, 300, 500),
        splitter_spacing_m=150.0,
    ),
    "s3": Scenario(
        name="immersive",
        bw_per_ru=10.0,
        t_proc_us=100.0,
        t_fh_us=250.0,
        max_split_ratio=16,
        map_side_m=5000.0,
        nd_sweep=(2, 4, 6, 10, 15),
        nr_sweep=(20, 50, 100, 150, 300, 500),
        splitter_spacing_m=150.0,
    ),
    "s4": Scenario(
        name="massive",
        bw_per_ru=5.0,
        t_proc_us=100.0,
        t_fh_us=150.0,
        max_split_ratio=32,
        map_side_m=10000.0,
        nd_sweep=(2, 3, 5, 10),
        nr_sweep=(50, 100, 200, 300),
        splitter_spacing_m=500.0,
    ),
}

_ALIASES = {
    "scenario1": "s1", "scenario2": "s2", "scenario3": "s3", "scenario4": "s4",
    "1": "s1", "2": "s2", "3": "s3", "4": "s4",
}


def get_scenario(name: str) -> Scenario:
    """Resolve a preset by key ('s1'..'s4'), alias, or scenario name."""
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key in SCENARIOS:
        return SCENARIOS[key]
    for sc in SCENARIOS.values():
        if sc.name == name:
            return sc
    raise KeyError(f"unknown scenario {name!r}; presets: {sorted(SCENARIOS)}")


def splitter_types_for(scenario: Scenario) -> tuple[int, ...]:
    """Admissible splitter fan-out exponents: 1..log2(max_split_ratio)."""
    return tuple(range(1, int(math.log2(scenario.max_split_ratio)) + 1))


def physical_params_for(scenario: Scenario, n_ru_max: int = N_RU_MAX) -> PhysicalParams:
    """Physical parameter set for a scenario (its split-ratio cap applied)."""
    return PhysicalParams(
        v_fiber=V_FIBER_M_S,
        l_fib=L_FIB_DB_KM,
        l_fix=L_FIX_DB,
        l_margin=L_MARGIN_DB,
        l_budget=L_BUDGET_DB,
        split_loss_per_level=SPLIT_LOSS_DB_PER_LEVEL,
        n_ru_max=n_ru_max,
        splitter_types=splitter_types_for(scenario),
        du_levels=tuple(range(int(math.log2(n_ru_max)) + 1)),
    )


def scenario_digest(scenario: Scenario) -> int:
    """Stable 64-bit digest of a scenario, used to key RNG substreams."""
    core = canonical_json(scenario.to_dict())
    return int.from_bytes(hashlib.sha256(core.encode()).digest()[:8], "big")
