"""Randomized constructive solver over the root -> DU -> splitter -> RU stages.

Each run permutes the RUs, samples three normalized weights, and commits
every RU to the (DU, site) pair minimizing a weighted incremental-cost
proxy under the running network state: trenching is charged once per
corridor, a new splitter unit only when the open ones have no free
port, DU activation and level upgrades as they happen. Assignment uses
one fixed splitter type; used corridors are re-dimensioned afterwards
and the run is scored by the exact unweighted TCO.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..costing import compute_tco, min_du_level
from ..types import (
    CostBreakdown,
    CostCatalog,
    NetworkInstance,
    PhysicalParams,
    Scenario,
    Solution,
    onu_cost_for_demand,
)
from .common import Deadline, SolverOutcome

__all__ = [
    "RssaConfig",
    "RssaState",
    "feasible_type_grid",
    "incremental_proxy",
    "run_once",
    "solve_rssa",
]

_US_PER_S = 1.0e6
_M_PER_KM = 1000.0


@dataclass(frozen=True)
class RssaConfig:
    t_ph1: Optional[int] = None   # assignment-phase splitter type; None = largest
    t_run_s: float = 1000.0
    patience: int = 1200
    epsilon: float = 1.0e-3
    seed: int = 0


@dataclass
class RssaState:
    """Mutable construction state of one run."""

    t_ph1: int
    trench_paid: np.ndarray   # (D, S) bool
    rem_cap: np.ndarray       # (D, S) free ports at the assignment type
    du_active: np.ndarray     # (D,) bool
    du_load: np.ndarray       # (D,) int
    du_level: np.ndarray      # (D,) int, meaningful only where active
    group_tmax: np.ndarray    # (D, S) running min of per-RU max feasible types
    assigned: list            # per processed RU: (d, s)

    @classmethod
    def fresh(cls, n_dus: int, n_splitters: int, t_ph1: int, t_top: int) -> "RssaState":
        return cls(
            t_ph1=t_ph1,
            trench_paid=np.zeros((n_dus, n_splitters), dtype=bool),
            rem_cap=np.zeros((n_dus, n_splitters), dtype=np.int64),
            du_active=np.zeros(n_dus, dtype=bool),
            du_load=np.zeros(n_dus, dtype=np.int64),
            du_level=np.zeros(n_dus, dtype=np.int64),
            group_tmax=np.full((n_dus, n_splitters), t_top, dtype=np.int64),
            assigned=[],
        )


def feasible_type_grid(inst: NetworkInstance, params: PhysicalParams,
                       scenario: Scenario) -> np.ndarray:
    """(R, D, S) array of the largest admissible splitter type per path, 0 = none."""
    path_m = inst.dist_ds[None, :, :] + inst.dist_sr.T[:, None, :]
    proc = np.array([ru.proc_latency_us for ru in inst.rus], dtype=np.float64)
    lat_ok = path_m / params.v_fiber * _US_PER_S + proc[:, None, None] <= scenario.t_fh_us
    headroom = (
        params.l_budget - params.l_fix - params.l_margin
        - params.l_fib * path_m / _M_PER_KM
    )
    allow = np.floor(headroom / params.split_loss_per_level)
    allow = np.clip(allow, 0, params.t_max).astype(np.int64)
    return np.where(lat_ok, allow, 0)


def _du_increment(state: RssaState, catalog: CostCatalog, d: int) -> float:
    """One-time activation plus level-upgrade energy for adding one RU to DU d."""
    if not state.du_active[d]:
        return (
            catalog.c_bp * (1.0 + catalog.t_op * catalog.c_m)
            + catalog.t_op * catalog.c_rent
            + catalog.t_op * catalog.c_p * (catalog.p_cool + catalog.p_du)
        )
    load = int(state.du_load[d])
    level = int(state.du_level[d])
    if load + 1 <= 2 ** level:
        return 0.0
    new_level = math.ceil(math.log2(load + 1))
    return catalog.t_op * catalog.c_p * catalog.p_du * (2 ** new_level - 2 ** level)


def incremental_proxy(
    state: RssaState,
    inst: NetworkInstance,
    catalog: CostCatalog,
    params: PhysicalParams,
    d: int,
    s: int,
    r: int,
    weights: tuple[float, float, float],
) -> float:
    """Weighted marginal cost of routing RU r through (d, s) in this state.

    The three weighted segments: DU-side (activation, rent, energy step),
    corridor-side (unpaid trench, plus feeder fiber and one splitter
    unit when no open port remains), and RU-side (distribution trench
    and fiber plus the RU's ONU).
    """
    w1, w2, w3 = weights
    ds_km = float(inst.dist_ds[d, s]) / _M_PER_KM
    du_part = _du_increment(state, catalog, d)
    ds_part = 0.0 if state.trench_paid[d, s] else ds_km * catalog.c_tr
    if state.rem_cap[d, s] == 0:
        ds_part += ds_km * catalog.c_ff + catalog.splitter_cost(state.t_ph1) * (
            1.0 + catalog.t_op * catalog.c_m
        )
    sr_part = (
        float(inst.dist_sr[s, r]) / _M_PER_KM * (catalog.c_tr + catalog.c_df)
        + onu_cost_for_demand(catalog, inst.rus[r].demand_gbps)
    )
    return w1 * du_part + w2 * ds_part + w3 * sr_part


@dataclass
class _RunResult:
    weights: tuple[float, float, float]
    solution: Optional[Solution]
    breakdown: Optional[CostBreakdown]


def _run(
    inst: NetworkInstance,
    params: PhysicalParams,
    catalog: CostCatalog,
    scenario: Scenario,
    t_ph1: int,
    tmax: np.ndarray,
    rng: np.random.Generator,
) -> _RunResult:
    nd, ns, nr = inst.n_dus, inst.n_splitters, inst.n_rus
    raw = rng.random(3)
    weights = tuple(float(w) for w in raw / raw.sum())
    w1, w2, w3 = weights
    order = rng.permutation(nr)

    state = RssaState.fresh(nd, ns, t_ph1, params.t_max)
    ru_site: list[Optional[tuple[int, int]]] = [None] * nr

    dist_ds_km = inst.dist_ds / _M_PER_KM
    trench_cost = dist_ds_km * catalog.c_tr
    open_cost = dist_ds_km * catalog.c_ff + catalog.splitter_cost(t_ph1) * (
        1.0 + catalog.t_op * catalog.c_m
    )
    sr_base = inst.dist_sr / _M_PER_KM * (catalog.c_tr + catalog.c_df)
    onu = np.array(
        [onu_cost_for_demand(catalog, ru.demand_gbps) for ru in inst.rus]
    )

    for r in (int(i) for i in order):
        candidates = tmax[r] >= t_ph1
        if not candidates.any():
            return _RunResult(weights, None, None)
        du_inc = np.array([_du_increment(state, catalog, d) for d in range(nd)])
        score = (
            w1 * du_inc[:, None]
            + w2 * np.where(state.trench_paid, 0.0, trench_cost)
            + w2 * np.where(state.rem_cap == 0, open_cost, 0.0)
            + w3 * (sr_base[:, r][None, :] + onu[r])
        )
        score = np.where(candidates, score, np.inf)
        flat = int(np.argmin(score))  # row-major tie-break: smallest (d, s)
        d, s = divmod(flat, ns)

        state.trench_paid[d, s] = True
        if state.rem_cap[d, s] == 0:
            state.rem_cap[d, s] += 2 ** t_ph1
        state.rem_cap[d, s] -= 1
        state.group_tmax[d, s] = min(int(state.group_tmax[d, s]), int(tmax[r, d, s]))
        if not state.du_active[d]:
            state.du_active[d] = True
            state.du_level[d] = 0
        state.du_load[d] += 1
        if state.du_load[d] > params.n_ru_max:
            return _RunResult(weights, None, None)
        if state.du_load[d] > 2 ** state.du_level[d]:
            state.du_level[d] = math.ceil(math.log2(int(state.du_load[d])))
        ru_site[r] = (d, s)
        state.assigned.append((d, s))

    # post-dimension every used corridor to one type and minimal unit count
    groups: dict[tuple[int, int], list[int]] = {}
    for r, pair in enumerate(ru_site):
        assert pair is not None
        groups.setdefault(pair, []).append(r)
    assignment: list[tuple[int, int, int]] = [(0, 0, 1)] * nr
    counts: dict[tuple[int, int, int], int] = {}
    feeder: dict[tuple[int, int], bool] = {}
    for (d, s), members in groups.items():
        n_ds = len(members)
        t_need = max(1, math.ceil(math.log2(n_ds)))
        t_star = min(int(state.group_tmax[d, s]), t_need)
        t_star = max(1, min(t_star, params.t_max))
        counts[(d, s, t_star)] = math.ceil(n_ds / 2 ** t_star)
        feeder[(d, s)] = True
        for r in members:
            assignment[r] = (d, s, t_star)

    du_active = [False] * nd
    du_level: list[Optional[int]] = [None] * nd
    for d in range(nd):
        load = int(state.du_load[d])
        if load > 0:
            du_active[d] = True
            du_level[d] = min_du_level(load, params)
    solution = Solution(
        assignment=tuple(assignment),
        splitter_counts=counts,
        feeder=feeder,
        du_active=tuple(du_active),
        du_level=tuple(du_level),
    )
    return _RunResult(weights, solution, compute_tco(inst, params, catalog, solution))


def _resolve_t_ph1(cfg: RssaConfig, params: PhysicalParams) -> int:
    t_ph1 = cfg.t_ph1 if cfg.t_ph1 is not None else params.t_max
    if t_ph1 not in params.splitter_types:
        raise ValueError(f"t_ph1={t_ph1} outside admissible types {params.splitter_types}")
    return t_ph1


def run_once(
    inst: NetworkInstance,
    params: PhysicalParams,
    catalog: CostCatalog,
    scenario: Scenario,
    cfg: RssaConfig,
    run_seed: int,
) -> Optional[tuple[Solution, CostBreakdown]]:
    """One randomized constructive pass; None when the run dead-ends."""
    t_ph1 = _resolve_t_ph1(cfg, params)
    tmax = feasible_type_grid(inst, params, scenario)
    res = _run(inst, params, catalog, scenario, t_ph1,
               tmax, np.random.default_rng(run_seed))
    if res.solution is None:
        return None
    return res.solution, res.breakdown


def solve_rssa(
    inst: NetworkInstance,
    params: PhysicalParams,
    catalog: CostCatalog,
    scenario: Scenario,
    cfg: RssaConfig,
) -> tuple[SolverOutcome, list[dict]]:
    """Repeat randomized runs until the budget or patience runs out.

    Infeasible runs count toward patience. Returns the cheapest feasible
    solution across runs, or an infeasible marker when every run failed.
    """
    deadline = Deadline(cfg.t_run_s)
    t_ph1 = _resolve_t_ph1(cfg, params)
    tmax = feasible_type_grid(inst, params, scenario)
    seed_root = np.random.SeedSequence(cfg.seed)

    best: Optional[tuple[Solution, CostBreakdown]] = None
    no_improve = 0
    runs = 0
    trace: list[dict] = []

    while not deadline.expired() and no_improve < cfg.patience:
        runs += 1
        rng = np.random.Generator(np.random.PCG64(seed_root.spawn(1)[0]))
        res = _run(inst, params, catalog, scenario, t_ph1, tmax, rng)
        feasible = res.solution is not None
        trace.append({
            "run": runs,
            "feasible": feasible,
            "true_cost": res.breakdown.total if feasible else "",
            "elapsed_s": round(deadline.elapsed(), 6),
            "w1": res.weights[0], "w2": res.weights[1], "w3": res.weights[2],
        })
        if feasible and (best is None or res.breakdown.total < best[1].total - cfg.epsilon):
            best = (res.solution, res.breakdown)
            no_improve = 0
        else:
            no_improve += 1

    if best is None:
        outcome = SolverOutcome(
            feasible=False, solution=None, breakdown=None, best_cost=None,
            iterations=runs, elapsed_s=deadline.elapsed(), failure="no-feasible-run",
        )
    else:
        outcome = SolverOutcome(
            feasible=True, solution=best[0], breakdown=best[1],
            best_cost=best[1].total, iterations=runs, elapsed_s=deadline.elapsed(),
        )
    return outcome, trace
