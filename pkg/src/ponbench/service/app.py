"""FastAPI service wrapping the planning toolkit.

Every computation endpoint is a thin adapter: pydantic payloads are
converted to core types, dispatched to the library, and the result is
serialized back. Domain validation errors surface as 422 responses.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import bench as bench_mod
from ..bench import ExperimentSpec, RunRecord, SOLVERS, aggregate, determinism_hash, plot_data
from ..costing import check_solution, compute_tco
from ..generator import GeneratorConfig, generate_instance
from ..ilp import build_model, export_lp, import_solution
from ..presets import DEFAULT_CATALOG, SCENARIOS, get_scenario, physical_params_for
from ..solvers.common import SolverOutcome
from ..types import CostCatalog, PhysicalParams, Scenario
from . import schemas as sch

__all__ = ["create_app"]


def _scenario(ref: sch.ScenarioRef) -> Scenario:
    if isinstance(ref, str):
        try:
            return get_scenario(ref)
        except KeyError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
    return ref.to_core()


def _catalog(ref: sch.CatalogModel | None) -> CostCatalog:
    return ref.to_core() if ref is not None else DEFAULT_CATALOG


def _params(ref: sch.ParamsModel | None, scenario: Scenario) -> PhysicalParams:
    return ref.to_core() if ref is not None else physical_params_for(scenario)


def create_app() -> FastAPI:
    app = FastAPI(
        title="ponbench",
        description="Benchmarking service for PON-based fronthaul network design",
        version="0.1.0",
    )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/scenarios", response_model=sch.ScenarioListResponse)
    def scenarios() -> sch.ScenarioListResponse:
        return sch.ScenarioListResponse(
            scenarios={k: sch.ScenarioModel.from_core(v) for k, v in SCENARIOS.items()},
            catalog=sch.CatalogModel.from_core(DEFAULT_CATALOG),
        )

    @app.post("/instances/generate", response_model=sch.InstanceModel)
    def generate(req: sch.GenerateRequest) -> sch.InstanceModel:
        try:
            cfg = GeneratorConfig(
                scenario=_scenario(req.scenario), n_du=req.n_du, n_ru=req.n_ru,
                topology_index=req.topology_index, master_seed=req.master_seed,
            )
            inst = generate_instance(cfg)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return sch.InstanceModel.from_core(inst)

    @app.post("/evaluate", response_model=sch.EvaluateResponse)
    def evaluate(req: sch.EvaluateRequest) -> sch.EvaluateResponse:
        scenario = _scenario(req.scenario)
        catalog = _catalog(req.catalog)
        params = _params(req.params, scenario)
        try:
            inst = req.instance.to_core()
            sol = req.solution.to_core()
            report = check_solution(inst, params, catalog, scenario, sol)
            breakdown = compute_tco(inst, params, catalog, sol)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return sch.EvaluateResponse(
            feasible=report.ok,
            breakdown=sch.BreakdownModel.from_core(breakdown),
            violations=[sch.ViolationModel.model_validate(v.to_dict())
                        for v in report.violations],
        )

    @app.post("/solve", response_model=sch.SolveResponse)
    def solve(req: sch.SolveRequest) -> sch.SolveResponse:
        if req.solver not in SOLVERS:
            raise HTTPException(
                status_code=422,
                detail=f"unknown solver {req.solver!r}; known: {sorted(SOLVERS)}",
            )
        scenario = _scenario(req.scenario)
        catalog = _catalog(req.catalog)
        params = physical_params_for(scenario)
        try:
            inst = req.instance.to_core()
            cfg = bench_mod.make_solver_config(req.solver, req.overrides, seed=0)
            _, solve_fn = SOLVERS[req.solver]
            outcome: SolverOutcome
            outcome, trace = solve_fn(inst, params, catalog, scenario, cfg)
        except (TypeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return sch.SolveResponse(
            feasible=outcome.feasible,
            solution=sch.SolutionModel.from_core(outcome.solution)
            if outcome.solution else None,
            breakdown=sch.BreakdownModel.from_core(outcome.breakdown)
            if outcome.breakdown else None,
            best_cost=outcome.best_cost,
            iterations=outcome.iterations,
            runtime_s=outcome.elapsed_s,
            failure=outcome.failure,
            trace=trace if req.include_trace else None,
        )

    @app.post("/lp/export", response_model=sch.ExportLpResponse)
    def lp_export(req: sch.ExportLpRequest) -> sch.ExportLpResponse:
        scenario = _scenario(req.scenario)
        try:
            inst = req.instance.to_core()
            model = build_model(inst, physical_params_for(scenario),
                                _catalog(req.catalog), scenario)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return sch.ExportLpResponse(
            lp=export_lp(model),
            variable_count=model.variable_count,
            constraint_count=len(model.rows),
            big_m=model.big_m,
        )

    @app.post("/lp/import", response_model=sch.ImportSolResponse)
    def lp_import(req: sch.ImportSolRequest) -> sch.ImportSolResponse:
        scenario = _scenario(req.scenario)
        catalog = _catalog(req.catalog)
        params = physical_params_for(scenario)
        try:
            inst = req.instance.to_core()
            model = build_model(inst, params, catalog, scenario)
            sol = import_solution(model, req.solver_output)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        report = check_solution(inst, params, catalog, scenario, sol)
        return sch.ImportSolResponse(
            solution=sch.SolutionModel.from_core(sol),
            feasible=report.ok,
            breakdown=sch.BreakdownModel.from_core(
                compute_tco(inst, params, catalog, sol)
            ),
        )

    @app.post("/bench", response_model=sch.BenchResponse)
    def bench(req: sch.BenchRequest) -> sch.BenchResponse:
        try:
            spec = ExperimentSpec.from_dict(req.spec)
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        records = bench_mod.run_experiment(spec, max_workers=req.max_workers)
        return sch.BenchResponse(
            records=[r.to_dict() for r in records],
            determinism_hash=determinism_hash(records),
        )

    @app.post("/report", response_model=sch.ReportResponse)
    def report(req: sch.ReportRequest) -> sch.ReportResponse:
        try:
            records = [RunRecord.from_dict(r) for r in req.records]
            summary = aggregate(records)
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return sch.ReportResponse(summary=summary, plots=plot_data(summary))

    return app
