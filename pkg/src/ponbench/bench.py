"""Experiment harness: scenario sweeps, metric extraction, aggregation.

A sweep runs every (n_du, n_ru, topology, solver) cell, re-validates
each claimed-feasible solution through the canonical checker, and keeps
going on failures. Records are deterministic for a fixed master seed
up to the runtime fields, which the determinism hash excludes.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .costing import check_solution, path_latency_us, path_loss_db
from .generator import GeneratorConfig, generate_instance
from .presets import DEFAULT_CATALOG, get_scenario, physical_params_for
from .solvers.common import SolverOutcome
from .solvers.ga import GaConfig, evolve
from .solvers.kmc import KmcConfig, solve_kmc
from .solvers.rssa import RssaConfig, solve_rssa
from .types import CostBreakdown, CostCatalog, Scenario, canonical_json

__all__ = [
    "ExperimentSpec",
    "RECORD_FIELDS",
    "RunRecord",
    "SOLVERS",
    "SolverSpec",
    "aggregate",
    "determinism_hash",
    "make_solver_config",
    "plot_data",
    "records_to_csv",
    "run_experiment",
]

SOLVERS: dict[str, tuple[type, Callable]] = {
    "ga": (GaConfig, evolve),
    "kmc": (KmcConfig, solve_kmc),
    "rssa": (RssaConfig, solve_rssa),
}

RECORD_FIELDS = (
    "scenario", "n_du", "n_ru", "topology_index", "solver", "feasible",
    "dist_fiber_trench", "feeder_trench_fiber", "equipment_capex",
    "maintenance_opex", "rent_opex", "energy_opex", "total",
    "n_splitters_deployed", "n_dus_active", "avg_ru_splitter_distance_m",
    "fraction_rus_constraint_ok", "runtime_s", "iterations", "error",
)

COMPONENT_KEYS = CostBreakdown.COMPONENT_FIELDS + ("total",)


@dataclass(frozen=True)
class SolverSpec:
    name: str
    overrides: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.name not in SOLVERS:
            raise ValueError(f"unknown solver {self.name!r}; known: {sorted(SOLVERS)}")
        object.__setattr__(self, "overrides", dict(self.overrides))

    def to_dict(self) -> dict:
        return {"name": self.name, "overrides": dict(self.overrides)}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SolverSpec":
        return cls(name=d["name"], overrides=d.get("overrides", {}))


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: Scenario
    nd_sweep: tuple[int, ...]
    nr_sweep: tuple[int, ...]
    solvers: tuple[SolverSpec, ...]
    n_topologies: int = 25
    master_seed: int = 0
    catalog: CostCatalog = DEFAULT_CATALOG
    output_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.n_topologies < 1:
            raise ValueError("n_topologies must be >= 1")
        if not self.solvers:
            raise ValueError("at least one solver is required")
        object.__setattr__(self, "nd_sweep", tuple(int(n) for n in self.nd_sweep))
        object.__setattr__(self, "nr_sweep", tuple(int(n) for n in self.nr_sweep))
        object.__setattr__(self, "solvers", tuple(self.solvers))
        bad_nd = [n for n in self.nd_sweep if n not in self.scenario.nd_sweep]
        bad_nr = [n for n in self.nr_sweep if n not in self.scenario.nr_sweep]
        if bad_nd or bad_nr:
            raise ValueError(
                f"sweep values outside the scenario's sweeps: nd={bad_nd} nr={bad_nr}"
            )

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "nd_sweep": list(self.nd_sweep),
            "nr_sweep": list(self.nr_sweep),
            "solvers": [s.to_dict() for s in self.solvers],
            "n_topologies": self.n_topologies,
            "master_seed": self.master_seed,
            "catalog": self.catalog.to_dict(),
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ExperimentSpec":
        raw_scenario = d["scenario"]
        scenario = (
            get_scenario(raw_scenario) if isinstance(raw_scenario, str)
            else Scenario.from_dict(raw_scenario)
        )
        catalog = (
            CostCatalog.from_dict(d["catalog"]) if "catalog" in d and d["catalog"]
            else DEFAULT_CATALOG
        )
        return cls(
            scenario=scenario,
            nd_sweep=tuple(d["nd_sweep"]),
            nr_sweep=tuple(d["nr_sweep"]),
            solvers=tuple(SolverSpec.from_dict(s) for s in d["solvers"]),
            n_topologies=int(d.get("n_topologies", 25)),
            master_seed=int(d.get("master_seed", 0)),
            catalog=catalog,
            output_dir=d.get("output_dir"),
        )


@dataclass(frozen=True)
class RunRecord:
    scenario: str
    n_du: int
    n_ru: int
    topology_index: int
    solver: str
    feasible: bool
    cost: Optional[CostBreakdown]
    n_splitters_deployed: Optional[int]
    n_dus_active: Optional[int]
    avg_ru_splitter_distance_m: Optional[float]
    fraction_rus_constraint_ok: Optional[float]
    runtime_s: float
    iterations: int
    error: Optional[str] = None

    def to_dict(self) -> dict:
        row: dict[str, Any] = {
            "scenario": self.scenario,
            "n_du": self.n_du,
            "n_ru": self.n_ru,
            "topology_index": self.topology_index,
            "solver": self.solver,
            "feasible": self.feasible,
        }
        for key in CostBreakdown.COMPONENT_FIELDS:
            row[key] = getattr(self.cost, key) if self.cost else None
        row["total"] = self.cost.total if self.cost else None
        row["n_splitters_deployed"] = self.n_splitters_deployed
        row["n_dus_active"] = self.n_dus_active
        row["avg_ru_splitter_distance_m"] = self.avg_ru_splitter_distance_m
        row["fraction_rus_constraint_ok"] = self.fraction_rus_constraint_ok
        row["runtime_s"] = self.runtime_s
        row["iterations"] = self.iterations
        row["error"] = self.error
        return row

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunRecord":
        cost = None
        if d.get("total") is not None:
            cost = CostBreakdown.from_dict(d)
        return cls(
            scenario=d["scenario"], n_du=int(d["n_du"]), n_ru=int(d["n_ru"]),
            topology_index=int(d["topology_index"]), solver=d["solver"],
            feasible=bool(d["feasible"]), cost=cost,
            n_splitters_deployed=d.get("n_splitters_deployed"),
            n_dus_active=d.get("n_dus_active"),
            avg_ru_splitter_distance_m=d.get("avg_ru_splitter_distance_m"),
            fraction_rus_constraint_ok=d.get("fraction_rus_constraint_ok"),
            runtime_s=float(d.get("runtime_s", 0.0)),
            iterations=int(d.get("iterations", 0)),
            error=d.get("error"),
        )


def make_solver_config(name: str, overrides: Mapping[str, Any], seed: int):
    """Build a solver config from overrides; the seed applies unless overridden."""
    cfg_cls, _ = SOLVERS[name]
    merged = dict(overrides)
    merged.setdefault("seed", seed)
    return cfg_cls(**merged)


def _derive_seed(master_seed: int, n_du: int, n_ru: int, topology: int,
                 solver_index: int) -> int:
    seq = np.random.SeedSequence([master_seed, n_du, n_ru, topology, solver_index])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _run_cell(payload: dict) -> dict:
    """Execute one (n_du, n_ru, topology, solver) cell; returns a record dict."""
    scenario = Scenario.from_dict(payload["scenario"])
    catalog = CostCatalog.from_dict(payload["catalog"])
    n_du, n_ru = payload["n_du"], payload["n_ru"]
    topology = payload["topology_index"]
    solver_name = payload["solver"]
    params = physical_params_for(scenario)

    base = {
        "scenario": scenario.name, "n_du": n_du, "n_ru": n_ru,
        "topology_index": topology, "solver": solver_name,
    }
    try:
        inst = generate_instance(GeneratorConfig(
            scenario=scenario, n_du=n_du, n_ru=n_ru,
            topology_index=topology, master_seed=payload["master_seed"],
        ))
        cfg = make_solver_config(solver_name, payload["overrides"], payload["seed"])
        _, solve = SOLVERS[solver_name]
        outcome: SolverOutcome
        outcome, _trace = solve(inst, params, catalog, scenario, cfg)
    except Exception as exc:  # sweep must survive any cell failure
        return RunRecord(
            **base, feasible=False, cost=None, n_splitters_deployed=None,
            n_dus_active=None, avg_ru_splitter_distance_m=None,
            fraction_rus_constraint_ok=None, runtime_s=0.0, iterations=0,
            error=f"{type(exc).__name__}: {exc}",
        ).to_dict()

    error = None
    feasible = outcome.feasible
    if feasible:
        report = check_solution(inst, params, catalog, scenario, outcome.solution)
        if not report.ok:
            feasible = False
            error = "solver-reported-feasible-failed-validation"
    budget = getattr(cfg, "t_run_s", None)
    if budget and outcome.elapsed_s > 1.2 * budget:
        error = (error + "; " if error else "") + "budget-overrun(1.2x)"

    if feasible:
        sol = outcome.solution
        dists = [float(inst.dist_sr[s, r]) for r, (_, s, _) in enumerate(sol.assignment)]
        ok_rus = 0
        for r, (d, s, t) in enumerate(sol.assignment):
            if (path_latency_us(inst, params, d, s, r) <= scenario.t_fh_us
                    and path_loss_db(inst, params, d, s, r, t) <= params.l_budget):
                ok_rus += 1
        record = RunRecord(
            **base, feasible=True, cost=outcome.breakdown,
            n_splitters_deployed=sum(sol.splitter_counts.values()),
            n_dus_active=sum(sol.du_active),
            avg_ru_splitter_distance_m=float(np.mean(dists)),
            fraction_rus_constraint_ok=ok_rus / inst.n_rus,
            runtime_s=outcome.elapsed_s, iterations=outcome.iterations,
            error=error,
        )
    else:
        failure = outcome.failure or "infeasible"
        record = RunRecord(
            **base, feasible=False, cost=None, n_splitters_deployed=None,
            n_dus_active=None, avg_ru_splitter_distance_m=None,
            fraction_rus_constraint_ok=None, runtime_s=outcome.elapsed_s,
            iterations=outcome.iterations,
            error=(error + "; " if error else "") + failure,
        )
    return record.to_dict()


def _probe_output_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-probe"
    probe.write_text("ok")
    probe.unlink()
    return out


def run_experiment(spec: ExperimentSpec, max_workers: int = 1) -> list[RunRecord]:
    """Run the full sweep; cell failures are recorded, never raised.

    The output directory (when configured) is validated before any cell
    runs; records land there as ``records.csv`` and ``records.json``.
    """
    out_dir = _probe_output_dir(spec.output_dir) if spec.output_dir else None

    payloads = []
    for n_du in spec.nd_sweep:
        for n_ru in spec.nr_sweep:
            for topology in range(spec.n_topologies):
                for solver_index, solver in enumerate(spec.solvers):
                    payloads.append({
                        "scenario": spec.scenario.to_dict(),
                        "catalog": spec.catalog.to_dict(),
                        "n_du": n_du, "n_ru": n_ru, "topology_index": topology,
                        "solver": solver.name, "overrides": dict(solver.overrides),
                        "master_seed": spec.master_seed,
                        "seed": _derive_seed(
                            spec.master_seed, n_du, n_ru, topology, solver_index
                        ),
                    })

    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(_run_cell, payloads))
    else:
        rows = [_run_cell(p) for p in payloads]
    records = [RunRecord.from_dict(row) for row in rows]

    if out_dir is not None:
        records_to_csv(records, out_dir / "records.csv")
        (out_dir / "records.json").write_text(
            json.dumps([r.to_dict() for r in records], indent=2)
        )
        (out_dir / "determinism.sha256").write_text(determinism_hash(records) + "\n")
    return records


def records_to_csv(records: Sequence[RunRecord], path: str | Path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(RECORD_FIELDS))
        writer.writeheader()
        for rec in records:
            row = rec.to_dict()
            writer.writerow({k: ("" if row[k] is None else row[k]) for k in RECORD_FIELDS})


def determinism_hash(records: Sequence[RunRecord]) -> str:
    """SHA-256 over the records with the wall-clock fields stripped."""
    rows = []
    for rec in records:
        row = rec.to_dict()
        row.pop("runtime_s", None)
        rows.append(row)
    return hashlib.sha256(canonical_json(rows).encode()).hexdigest()


def _mean_ci(values: Sequence[float]) -> tuple[float, Optional[float], Optional[float]]:
    """Mean with a 95% Student-t interval; bounds are None for n < 2."""
    n = len(values)
    mean = float(np.mean(values))
    if n < 2:
        return mean, None, None
    half = float(stats.t.ppf(0.975, n - 1) * np.std(values, ddof=1) / math.sqrt(n))
    return mean, mean - half, mean + half


def aggregate(records: Sequence[RunRecord]) -> list[dict]:
    """Per (scenario, n_du, n_ru, solver): cost statistics and rates."""
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict[tuple, list[RunRecord]] = {}
    for rec in records:
        groups.setdefault((rec.scenario, rec.n_du, rec.n_ru, rec.solver), []).append(rec)

    out = []
    for (scenario, n_du, n_ru, solver) in sorted(groups):
        recs = groups[(scenario, n_du, n_ru, solver)]
        feasible = [r for r in recs if r.feasible]
        row: dict[str, Any] = {
            "scenario": scenario, "n_du": n_du, "n_ru": n_ru, "solver": solver,
            "n_records": len(recs), "n_feasible": len(feasible),
            "feasibility_rate": len(feasible) / len(recs),
            "mean_runtime_s": float(np.mean([r.runtime_s for r in recs])),
            "ci_defined": len(feasible) >= 2,
        }
        for key in COMPONENT_KEYS:
            if feasible:
                values = [getattr(r.cost, key) for r in feasible]
                mean, lo, hi = _mean_ci(values)
            else:
                mean = lo = hi = None
            row[f"{key}_mean"] = mean
            row[f"{key}_ci_lo"] = lo
            row[f"{key}_ci_hi"] = hi
        out.append(row)
    return out


def plot_data(summary: Sequence[Mapping[str, Any]]) -> dict[str, list[dict]]:
    """Plot-ready tables keyed by name; rows carry (x, solver, mean, ci_lo, ci_hi, component).

    Three families per scenario: total cost against RU count at each DU
    count, total cost against DU count at each RU count, and the
    per-component breakdown against RU count at each DU count.
    """
    plots: dict[str, list[dict]] = {}

    def add(name: str, x: Any, row: Mapping[str, Any], component: str) -> None:
        if row[f"{component}_mean"] is None:
            return
        plots.setdefault(name, []).append({
            "x": x, "solver": row["solver"],
            "mean": row[f"{component}_mean"],
            "ci_lo": row[f"{component}_ci_lo"],
            "ci_hi": row[f"{component}_ci_hi"],
            "component": component,
        })

    for row in summary:
        scenario = row["scenario"]
        add(f"cost_vs_nru__{scenario}__nd{row['n_du']}", row["n_ru"], row, "total")
        add(f"cost_vs_ndu__{scenario}__nr{row['n_ru']}", row["n_du"], row, "total")
        for component in CostBreakdown.COMPONENT_FIELDS:
            add(f"components_vs_nru__{scenario}__nd{row['n_du']}",
                row["n_ru"], row, component)
    for rows in plots.values():
        rows.sort(key=lambda r: (r["x"], r["solver"], r["component"]))
    return plots
