"""Shared evaluator: path feasibility, full-solution constraint checks, TCO.

Every solver and the exact model score through this module, so there is
a single definition of cost and feasibility in the artifact.

Constraint identifiers used by the feasibility report, in check order:

  assignment_unique   every RU uses exactly one path
  splitter_ports      RUs on a (du, site, type) cannot exceed open ports
  feeder_link         splitters at a corridor require its feeder trench
  feeder_active_du    a feeder corridor requires its DU to be active
  latency_budget      propagation + processing within the one-way budget
  loss_budget         fiber + splitter + fixed + margin loss within budget
  level_selection     an active DU selects exactly one capacity level
  du_capacity         DU load within its selected level
  du_level_cap        selected level capacity within the per-DU maximum
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .types import (
    CostBreakdown,
    CostCatalog,
    NetworkInstance,
    PhysicalParams,
    Scenario,
    Solution,
    onu_cost_for_demand,
)

__all__ = [
    "CONSTRAINT_IDS",
    "ConstraintViolation",
    "FeasibilityReport",
    "check_solution",
    "compute_tco",
    "max_feasible_type",
    "min_du_level",
    "path_latency_us",
    "path_loss_db",
    "unit_cap",
]

CONSTRAINT_IDS = (
    "assignment_unique",
    "splitter_ports",
    "feeder_link",
    "feeder_active_du",
    "latency_budget",
    "loss_budget",
    "level_selection",
    "du_capacity",
    "du_level_cap",
)

_M_PER_KM = 1000.0
_US_PER_S = 1.0e6


def path_latency_us(inst: NetworkInstance, params: PhysicalParams, d: int, s: int, r: int) -> float:
    """One-way latency of the d->s->r path: propagation plus RU processing."""
    length_m = float(inst.dist_ds[d, s]) + float(inst.dist_sr[s, r])
    return length_m / params.v_fiber * _US_PER_S + inst.rus[r].proc_latency_us


def path_loss_db(inst: NetworkInstance, params: PhysicalParams,
                 d: int, s: int, r: int, t: int) -> float:
    """End-to-end optical loss of the d->s->r path through a type-t splitter."""
    length_km = (float(inst.dist_ds[d, s]) + float(inst.dist_sr[s, r])) / _M_PER_KM
    return (
        params.l_fib * length_km
        + params.splitter_loss(t)
        + params.l_fix
        + params.l_margin
    )


def max_feasible_type(inst: NetworkInstance, params: PhysicalParams, scenario: Scenario,
                      d: int, s: int, r: int) -> Optional[int]:
    """Largest admissible splitter type on the d->s->r path, or None.

    Latency does not depend on the type, so None means the path itself
    is out of budget or even the smallest type exceeds the loss budget.
    """
    if path_latency_us(inst, params, d, s, r) > scenario.t_fh_us:
        return None
    for t in reversed(params.splitter_types):
        if path_loss_db(inst, params, d, s, r, t) <= params.l_budget:
            return t
    return None


def min_du_level(load: int, params: PhysicalParams) -> Optional[int]:
    """Smallest capacity level serving ``load`` RUs, or None if over the cap."""
    if load <= 0:
        return None
    for k in params.du_levels:
        if 2 ** k >= load:
            return k
    return None


def unit_cap(inst: NetworkInstance, params: PhysicalParams) -> int:
    """Most splitter units a corridor can ever usefully hold.

    Serving every RU with the smallest type needs ceil(R / 2^t_min)
    units; cost-minimal dimensioning never exceeds that, so the exact
    model uses this as its corridor coupling constant and the checker
    applies the same bound.
    """
    return math.ceil(inst.n_rus / 2 ** params.splitter_types[0])


@dataclass(frozen=True)
class ConstraintViolation:
    constraint: str
    indices: dict
    magnitude: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "constraint": self.constraint,
            "indices": dict(self.indices),
            "magnitude": self.magnitude,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[ConstraintViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def constraints_hit(self) -> set[str]:
        return {v.constraint for v in self.violations}

    def by_constraint(self) -> dict[str, list[ConstraintViolation]]:
        out: dict[str, list[ConstraintViolation]] = {}
        for v in self.violations:
            out.setdefault(v.constraint, []).append(v)
        return out

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


def _check_indices(inst: NetworkInstance, params: PhysicalParams, sol: Solution) -> None:
    nd, ns, nr = inst.n_dus, inst.n_splitters, inst.n_rus
    if len(sol.assignment) != nr:
        raise ValueError(f"solution covers {len(sol.assignment)} RUs, instance has {nr}")
    if len(sol.du_active) != nd:
        raise ValueError(f"solution covers {len(sol.du_active)} DUs, instance has {nd}")
    types = set(params.splitter_types)
    levels = set(params.du_levels)
    for r, (d, s, t) in enumerate(sol.assignment):
        if not (0 <= d < nd and 0 <= s < ns):
            raise ValueError(f"assignment[{r}] references ({d}, {s}) out of range")
        if t not in types:
            raise ValueError(f"assignment[{r}] uses splitter type {t} outside {sorted(types)}")
    for (d, s, t) in sol.splitter_counts:
        if not (0 <= d < nd and 0 <= s < ns) or t not in types:
            raise ValueError(f"splitter_counts key ({d}, {s}, {t}) out of range")
    for (d, s) in sol.feeder:
        if not (0 <= d < nd and 0 <= s < ns):
            raise ValueError(f"feeder key ({d}, {s}) out of range")
    for d, k in enumerate(sol.du_level):
        if k is not None and k not in levels:
            raise ValueError(f"du_level[{d}]={k} outside {sorted(levels)}")


def check_solution(inst: NetworkInstance, params: PhysicalParams, catalog: CostCatalog,
                   scenario: Scenario, sol: Solution) -> FeasibilityReport:
    """Evaluate every deployment constraint; violations are returned as data.

    The precondition is structural validity (index ranges, admissible
    types and levels); anything beyond that, including internally
    inconsistent solver states, comes back as a report entry rather
    than an exception.
    """
    del catalog  # signature kept symmetric with compute_tco
    _check_indices(inst, params, sol)
    out: list[ConstraintViolation] = []

    # assignment_unique holds by construction of Solution (one tuple per RU);
    # it is listed for completeness and mirrored by the exact model's rows.

    loads_dst: dict[tuple[int, int, int], int] = {}
    for d, s, t in sol.assignment:
        loads_dst[(d, s, t)] = loads_dst.get((d, s, t), 0) + 1
    for (d, s, t), load in sorted(loads_dst.items()):
        ports = 2 ** t * sol.splitter_counts.get((d, s, t), 0)
        if load > ports:
            out.append(ConstraintViolation(
                "splitter_ports", {"du": d, "splitter": s, "type": t},
                magnitude=float(load - ports),
                detail=f"{load} RUs on {ports} ports",
            ))

    cap = unit_cap(inst, params)
    corridor_units: dict[tuple[int, int], int] = {}
    for (d, s, _), n in sol.splitter_counts.items():
        corridor_units[(d, s)] = corridor_units.get((d, s), 0) + n
    for (d, s), units in sorted(corridor_units.items()):
        allowed = cap if sol.feeder.get((d, s), False) else 0
        if units > allowed:
            out.append(ConstraintViolation(
                "feeder_link", {"du": d, "splitter": s},
                magnitude=float(units - allowed),
                detail=(
                    "splitters deployed without a feeder trench" if allowed == 0
                    else f"{units} units exceed the corridor cap {cap}"
                ),
            ))

    for d, s in sorted(sol.feeder):
        if not sol.du_active[d]:
            out.append(ConstraintViolation(
                "feeder_active_du", {"du": d, "splitter": s}, magnitude=1.0,
                detail="feeder corridor to an inactive DU",
            ))

    for r, (d, s, t) in enumerate(sol.assignment):
        lat = path_latency_us(inst, params, d, s, r)
        if lat > scenario.t_fh_us:
            out.append(ConstraintViolation(
                "latency_budget", {"ru": r, "du": d, "splitter": s},
                magnitude=lat - scenario.t_fh_us,
                detail=f"{lat:.3f} us > {scenario.t_fh_us} us",
            ))
    for r, (d, s, t) in enumerate(sol.assignment):
        loss = path_loss_db(inst, params, d, s, r, t)
        if loss > params.l_budget:
            out.append(ConstraintViolation(
                "loss_budget", {"ru": r, "du": d, "splitter": s, "type": t},
                magnitude=loss - params.l_budget,
                detail=f"{loss:.3f} dB > {params.l_budget} dB",
            ))

    for d in range(inst.n_dus):
        active = sol.du_active[d]
        level = sol.du_level[d]
        if active and level is None:
            out.append(ConstraintViolation(
                "level_selection", {"du": d}, magnitude=1.0,
                detail="active DU without a capacity level",
            ))
        if not active and level is not None:
            out.append(ConstraintViolation(
                "level_selection", {"du": d}, magnitude=1.0,
                detail=f"inactive DU with level {level}",
            ))

    loads = sol.du_loads()
    for d in range(inst.n_dus):
        load = loads.get(d, 0)
        level = sol.du_level[d]
        capacity = 2 ** level if level is not None else 0
        if load > capacity:
            out.append(ConstraintViolation(
                "du_capacity", {"du": d}, magnitude=float(load - capacity),
                detail=f"load {load} exceeds level capacity {capacity}",
            ))
        if level is not None and capacity > params.n_ru_max:
            out.append(ConstraintViolation(
                "du_level_cap", {"du": d}, magnitude=float(capacity - params.n_ru_max),
                detail=f"level capacity {capacity} exceeds cap {params.n_ru_max}",
            ))

    return FeasibilityReport(tuple(out))


def compute_tco(inst: NetworkInstance, params: PhysicalParams, catalog: CostCatalog,
                sol: Solution) -> CostBreakdown:
    """Total cost of ownership of a solution, split into six components.

    Feasibility is not required: heuristics score intermediate and
    violating states through the same function. Component definitions:

    1. distribution fiber + trenching over every RU's splitter leg
    2. feeder trenching per corridor plus feeder fiber per splitter unit
    3. equipment CapEx: DU installs, ONUs, splitter units
    4. maintenance: t_op * c_m * equipment CapEx
    5. site rent: t_op * c_rent per active DU
    6. energy over t_op: DU cooling + level-dependent DU draw + RU/ONU draw
    """
    dist_cost = 0.0
    for r, (d, s, t) in enumerate(sol.assignment):
        dist_cost += (catalog.c_df + catalog.c_tr) * float(inst.dist_sr[s, r]) / _M_PER_KM

    feeder_cost = 0.0
    corridor_units: dict[tuple[int, int], int] = {}
    for (d, s, t), n in sol.splitter_counts.items():
        corridor_units[(d, s)] = corridor_units.get((d, s), 0) + n
    for (d, s) in set(corridor_units) | set(sol.feeder):
        km = float(inst.dist_ds[d, s]) / _M_PER_KM
        trench = catalog.c_tr if sol.feeder.get((d, s), False) else 0.0
        feeder_cost += km * (trench + catalog.c_ff * corridor_units.get((d, s), 0))

    n_active = sum(sol.du_active)
    equip_cost = catalog.c_bp * n_active
    for ru in inst.rus:
        equip_cost += onu_cost_for_demand(catalog, ru.demand_gbps)
    for (d, s, t), n in sol.splitter_counts.items():
        equip_cost += catalog.splitter_cost(t) * n

    maint_cost = catalog.t_op * catalog.c_m * equip_cost
    rent_cost = catalog.t_op * catalog.c_rent * n_active

    du_power = 0.0
    for d in range(inst.n_dus):
        if sol.du_active[d]:
            du_power += catalog.p_cool
        if sol.du_level[d] is not None:
            du_power += 2 ** sol.du_level[d] * catalog.p_du
    energy_cost = catalog.t_op * catalog.c_p * (
        du_power + inst.n_rus * (catalog.p_onu + catalog.p_ru)
    )

    return CostBreakdown.from_components(
        dist_fiber_trench=dist_cost,
        feeder_trench_fiber=feeder_cost,
        equipment_capex=equip_cost,
        maintenance_opex=maint_cost,
        rent_opex=rent_cost,
        energy_opex=energy_cost,
    )
