"""Pydantic request/response models for the HTTP service.

These mirror the canonical JSON encodings of the core types field for
field, so a payload accepted here round-trips through the dataclass
layer unchanged.
"""
from __future__ import annotations

from typing import Any, Optional, Union

from pydantic import BaseModel, Field

from ..bench import ExperimentSpec, RunRecord
from ..types import (
    CostBreakdown,
    CostCatalog,
    NetworkInstance,
    PhysicalParams,
    Scenario,
    Solution,
)


class PointModel(BaseModel):
    x: float
    y: float


class RUModel(BaseModel):
    position: PointModel
    demand_gbps: float
    proc_latency_us: float


class InstanceModel(BaseModel):
    du_sites: list[PointModel]
    splitter_sites: list[PointModel]
    rus: list[RUModel]
    dist_ds: list[list[float]]
    dist_sr: list[list[float]]
    seed: int

    def to_core(self) -> NetworkInstance:
        return NetworkInstance.from_dict(self.model_dump())

    @classmethod
    def from_core(cls, inst: NetworkInstance) -> "InstanceModel":
        return cls.model_validate(inst.to_dict())


class ScenarioModel(BaseModel):
    name: str
    bw_per_ru: float
    t_proc_us: float
    t_fh_us: float
    max_split_ratio: int
    map_side_m: float
    nd_sweep: list[int]
    nr_sweep: list[int]
    splitter_spacing_m: float

    def to_core(self) -> Scenario:
        return Scenario.from_dict(self.model_dump())

    @classmethod
    def from_core(cls, sc: Scenario) -> "ScenarioModel":
        return cls.model_validate(sc.to_dict())


class CatalogModel(BaseModel):
    c_df: float
    c_ff: float
    c_tr: float
    c_bp: float
    c_rent: float
    c_m: float
    c_p: float
    t_op: float
    onu_rates: list[float]
    onu_costs: list[float]
    splitter_cost_base: float
    splitter_cost_per_level: float
    p_cool: float
    p_du: float
    p_ru: float
    p_onu: float

    def to_core(self) -> CostCatalog:
        return CostCatalog.from_dict(self.model_dump())

    @classmethod
    def from_core(cls, cat: CostCatalog) -> "CatalogModel":
        return cls.model_validate(cat.to_dict())


class ParamsModel(BaseModel):
    v_fiber: float
    l_fib: float
    l_fix: float
    l_margin: float
    l_budget: float
    split_loss_per_level: float
    n_ru_max: int
    splitter_types: list[int]
    du_levels: list[int]

    def to_core(self) -> PhysicalParams:
        return PhysicalParams.from_dict(self.model_dump())

    @classmethod
    def from_core(cls, p: PhysicalParams) -> "ParamsModel":
        return cls.model_validate(p.to_dict())


class SolutionModel(BaseModel):
    assignment: list[list[int]]
    splitter_counts: list[list[int]]
    feeder: list[list[int]]
    du_active: list[bool]
    du_level: list[Optional[int]]

    def to_core(self) -> Solution:
        return Solution.from_dict(self.model_dump())

    @classmethod
    def from_core(cls, sol: Solution) -> "SolutionModel":
        return cls.model_validate(sol.to_dict())


class BreakdownModel(BaseModel):
    dist_fiber_trench: float
    feeder_trench_fiber: float
    equipment_capex: float
    maintenance_opex: float
    rent_opex: float
    energy_opex: float
    total: float

    @classmethod
    def from_core(cls, bd: CostBreakdown) -> "BreakdownModel":
        return cls.model_validate(bd.to_dict())


class ViolationModel(BaseModel):
    constraint: str
    indices: dict[str, int]
    magnitude: float
    detail: str = ""


ScenarioRef = Union[str, ScenarioModel]


class GenerateRequest(BaseModel):
    scenario: ScenarioRef
    n_du: int
    n_ru: int
    topology_index: int = 0
    master_seed: int = 0


class EvaluateRequest(BaseModel):
    instance: InstanceModel
    solution: SolutionModel
    scenario: ScenarioRef
    catalog: Optional[CatalogModel] = None
    params: Optional[ParamsModel] = None


class EvaluateResponse(BaseModel):
    feasible: bool
    breakdown: BreakdownModel
    violations: list[ViolationModel]


class SolveRequest(BaseModel):
    instance: InstanceModel
    scenario: ScenarioRef
    solver: str
    overrides: dict[str, Any] = Field(default_factory=dict)
    catalog: Optional[CatalogModel] = None
    include_trace: bool = False


class SolveResponse(BaseModel):
    feasible: bool
    solution: Optional[SolutionModel]
    breakdown: Optional[BreakdownModel]
    best_cost: Optional[float]
    iterations: int
    runtime_s: float
    failure: Optional[str]
    trace: Optional[list[dict]] = None


class ExportLpRequest(BaseModel):
    instance: InstanceModel
    scenario: ScenarioRef
    catalog: Optional[CatalogModel] = None


class ExportLpResponse(BaseModel):
    lp: str
    variable_count: int
    constraint_count: int
    big_m: int


class ImportSolRequest(BaseModel):
    instance: InstanceModel
    scenario: ScenarioRef
    solver_output: str
    catalog: Optional[CatalogModel] = None


class ImportSolResponse(BaseModel):
    solution: SolutionModel
    feasible: bool
    breakdown: BreakdownModel


class BenchRequest(BaseModel):
    spec: dict[str, Any]
    max_workers: int = 1


class BenchResponse(BaseModel):
    records: list[dict]
    determinism_hash: str


class ReportRequest(BaseModel):
    records: list[dict]


class ReportResponse(BaseModel):
    summary: list[dict]
    plots: dict[str, list[dict]]


class ScenarioListResponse(BaseModel):
    scenarios: dict[str, ScenarioModel]
    catalog: CatalogModel
