"""Genetic algorithm over the two-tier assignment encoding.

A chromosome carries one splitter index per RU and one DU index per
splitter site. Splitter types, unit counts, feeder corridors and DU
levels are never encoded; they are decoded deterministically during
fitness evaluation, with constraint violations folded into the
objective as dominating hard penalties plus magnitude-proportional
soft penalties.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..costing import check_solution, compute_tco, min_du_level
from ..types import CostBreakdown, CostCatalog, NetworkInstance, PhysicalParams, Scenario, Solution
from .common import Deadline, SolverOutcome

__all__ = [
    "Chromosome",
    "DecodeResult",
    "GaConfig",
    "ViolationTally",
    "decode_and_score",
    "evolve",
    "nearest_neighbor_sets",
    "repair",
]

_US_PER_S = 1.0e6
_M_PER_KM = 1000.0


@dataclass
class Chromosome:
    s_assign: np.ndarray  # shape (n_rus,), splitter site per RU
    d_assign: np.ndarray  # shape (n_splitters,), DU per splitter site

    def copy(self) -> "Chromosome":
        return Chromosome(self.s_assign.copy(), self.d_assign.copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Chromosome):
            return NotImplemented
        return np.array_equal(self.s_assign, other.s_assign) and np.array_equal(
            self.d_assign, other.d_assign
        )


@dataclass(frozen=True)
class GaConfig:
    pop_size: int = 200
    max_generations: int = 1_000_000
    elite_fraction: float = 0.10
    tournament_k: int = 3
    p_crossover: float = 0.85
    p_mut_ru: float = 0.03
    p_mut_sd: float = 0.02
    p_repair: float = 0.40
    repair_ru_fraction: float = 0.25
    knn: int = 8
    active_site_weight: float = 100.0
    hard_penalty: float = 1.0e9
    soft_penalty: float = 1.0e6
    t_run_s: float = 1000.0
    patience: int = 1200
    epsilon: float = 1.0e-3
    seed: int = 0

    def __post_init__(self) -> None:
        for p in (self.elite_fraction, self.p_crossover, self.p_mut_ru,
                  self.p_mut_sd, self.p_repair, self.repair_ru_fraction):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probabilities must lie in [0, 1], got {p}")
        if self.pop_size < 2:
            raise ValueError("pop_size must be at least 2")
        if self.knn < 1:
            raise ValueError("knn must be at least 1")


@dataclass
class ViolationTally:
    """Hard-violation counts by category plus soft violation magnitudes."""

    reach: int = 0
    latency: int = 0
    no_feasible_type: int = 0
    du_capacity: int = 0
    reach_excess_db: float = 0.0
    latency_excess_us: float = 0.0
    capacity_excess_rus: float = 0.0

    @property
    def hard_count(self) -> int:
        return self.reach + self.latency + self.no_feasible_type + self.du_capacity

    @property
    def is_clean(self) -> bool:
        return self.hard_count == 0

    def omega(self, hard_penalty: float, soft_penalty: float) -> float:
        soft = self.reach_excess_db + self.latency_excess_us + self.capacity_excess_rus
        return hard_penalty * self.hard_count + soft_penalty * soft


@dataclass
class DecodeResult:
    j: float
    psi: float
    omega: float
    solution: Solution
    tally: ViolationTally
    breakdown: CostBreakdown


def nearest_neighbor_sets(inst: NetworkInstance, knn: int) -> tuple[np.ndarray, np.ndarray]:
    """(RU -> k nearest splitter sites, site -> k nearest DUs), distance order."""
    k_s = min(knn, inst.n_splitters)
    k_d = min(knn, inst.n_dus)
    knn_s = np.argsort(inst.dist_sr, axis=0, kind="stable")[:k_s].T.copy()
    knn_d = np.argsort(inst.dist_ds, axis=0, kind="stable")[:k_d].T.copy()
    return knn_s, knn_d


def _largest_feasible_type(params: PhysicalParams, path_m: float) -> Optional[int]:
    loss_base = params.l_fib * path_m / _M_PER_KM + params.l_fix + params.l_margin
    for t in reversed(params.splitter_types):
        if loss_base + params.splitter_loss(t) <= params.l_budget:
            return t
    return None


def decode_and_score(
    chrom: Chromosome,
    inst: NetworkInstance,
    params: PhysicalParams,
    catalog: CostCatalog,
    scenario: Scenario,
    active_site_weight: float = 100.0,
    hard_penalty: float = 1.0e9,
    soft_penalty: float = 1.0e6,
) -> DecodeResult:
    """Deterministically decode a chromosome and score it.

    Active splitters are those with at least one assigned RU. Each
    active splitter takes its DU from the chromosome, the largest
    splitter type its worst assigned RU can tolerate under the loss
    budget, and exactly enough units for its load. The fitness is the
    cost proxy (true TCO of the decoded state plus a small charge per
    active site) plus the violation penalty.
    """
    tally = ViolationTally()
    groups: dict[int, list[int]] = {}
    for r, s in enumerate(chrom.s_assign):
        groups.setdefault(int(s), []).append(r)

    t_min = params.splitter_types[0]
    assignment: list[tuple[int, int, int]] = [(0, 0, t_min)] * inst.n_rus
    counts: dict[tuple[int, int, int], int] = {}
    feeder: dict[tuple[int, int], bool] = {}
    du_loads: dict[int, int] = {}

    for s in sorted(groups):
        rus = groups[s]
        d = int(chrom.d_assign[s])
        feed_m = float(inst.dist_ds[d, s])
        worst_sr = max(float(inst.dist_sr[s, r]) for r in rus)
        worst_path = feed_m + worst_sr

        worst_lat = max(
            (feed_m + float(inst.dist_sr[s, r])) / params.v_fiber * _US_PER_S
            + inst.rus[r].proc_latency_us
            for r in rus
        )
        if worst_lat > scenario.t_fh_us:
            tally.latency += 1
            tally.latency_excess_us += worst_lat - scenario.t_fh_us

        loss_floor = (
            params.l_fib * worst_path / _M_PER_KM
            + params.splitter_loss(t_min)
            + params.l_fix
            + params.l_margin
        )
        if loss_floor > params.l_budget:
            tally.reach += 1
            tally.reach_excess_db += loss_floor - params.l_budget

        t_feas = _largest_feasible_type(params, worst_path)
        if t_feas is None:
            tally.no_feasible_type += 1
            t_used = t_min
        else:
            t_used = t_feas

        n_units = math.ceil(len(rus) / 2 ** t_used)
        counts[(d, s, t_used)] = counts.get((d, s, t_used), 0) + n_units
        feeder[(d, s)] = True
        for r in rus:
            assignment[r] = (d, s, t_used)
        du_loads[d] = du_loads.get(d, 0) + len(rus)

    du_active = [False] * inst.n_dus
    du_level: list[Optional[int]] = [None] * inst.n_dus
    for d, load in du_loads.items():
        du_active[d] = True
        level = min_du_level(load, params)
        if level is None:
            tally.du_capacity += 1
            tally.capacity_excess_rus += load - params.n_ru_max
            level = params.du_levels[-1]
        du_level[d] = level

    solution = Solution(
        assignment=tuple(assignment),
        splitter_counts=counts,
        feeder=feeder,
        du_active=tuple(du_active),
        du_level=tuple(du_level),
    )
    breakdown = compute_tco(inst, params, catalog, solution)
    psi = breakdown.total + active_site_weight * len(groups)
    omega = tally.omega(hard_penalty, soft_penalty)
    return DecodeResult(
        j=psi + omega, psi=psi, omega=omega,
        solution=solution, tally=tally, breakdown=breakdown,
    )


def repair(
    chrom: Chromosome,
    inst: NetworkInstance,
    params: PhysicalParams,
    scenario: Scenario,
    rng: Optional[np.random.Generator] = None,
    knn_splitters: Optional[np.ndarray] = None,
    knn_dus: Optional[np.ndarray] = None,
    ru_fraction: float = 0.25,
    deadline: Optional[Deadline] = None,
) -> Chromosome:
    """Three-step repair; returns a new chromosome, input left untouched.

    1. Splitters whose worst RU admits no splitter type move to their
       nearest DU.
    2. A fraction of the RUs sitting on reach- or latency-violating
       splitters reroute to the nearest feasible candidate in their
       neighbor set.
    3. Overloaded DUs shed their lightest splitter to the nearest DU
       with spare capacity, repeatedly.

    Every step polls the deadline and returns early once it expires.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if knn_splitters is None or knn_dus is None:
        knn_splitters, knn_dus = nearest_neighbor_sets(inst, 8)
    out = chrom.copy()

    def expired() -> bool:
        return deadline is not None and deadline.expired()

    def group_map() -> dict[int, list[int]]:
        g: dict[int, list[int]] = {}
        for r, s in enumerate(out.s_assign):
            g.setdefault(int(s), []).append(r)
        return g

    def worst_path(s: int, rus: list[int]) -> float:
        d = int(out.d_assign[s])
        return float(inst.dist_ds[d, s]) + max(float(inst.dist_sr[s, r]) for r in rus)

    def ru_path_ok(s: int, r: int) -> bool:
        d = int(out.d_assign[s])
        path = float(inst.dist_ds[d, s]) + float(inst.dist_sr[s, r])
        lat = path / params.v_fiber * _US_PER_S + inst.rus[r].proc_latency_us
        return lat <= scenario.t_fh_us and _largest_feasible_type(params, path) is not None

    groups = group_map()

    # step 1: dead optical groups to their nearest DU
    for s in sorted(groups):
        if expired():
            return out
        if _largest_feasible_type(params, worst_path(s, groups[s])) is None:
            out.d_assign[s] = knn_dus[s, 0]

    # step 2: reroute a slice of the RUs stuck on violating splitters
    groups = group_map()
    stranded: list[int] = []
    for s in sorted(groups):
        if expired():
            return out
        rus = groups[s]
        path = worst_path(s, rus)
        d = int(out.d_assign[s])
        lat_bad = any(
            (float(inst.dist_ds[d, s]) + float(inst.dist_sr[s, r])) / params.v_fiber * _US_PER_S
            + inst.rus[r].proc_latency_us > scenario.t_fh_us
            for r in rus
        )
        if lat_bad or _largest_feasible_type(params, path) is None:
            stranded.extend(rus)
    if stranded:
        take = max(1, math.ceil(ru_fraction * len(stranded)))
        moved = rng.choice(len(stranded), size=min(take, len(stranded)), replace=False)
        for i in sorted(int(m) for m in moved):
            if expired():
                return out
            r = stranded[i]
            for cand in knn_splitters[r]:
                if ru_path_ok(int(cand), r):
                    out.s_assign[r] = int(cand)
                    break

    # step 3: drain overloaded DUs
    groups = group_map()
    du_load: dict[int, int] = {}
    site_du: dict[int, int] = {}
    for s, rus in groups.items():
        d = int(out.d_assign[s])
        site_du[s] = d
        du_load[d] = du_load.get(d, 0) + len(rus)
    for d in sorted(du_load):
        while du_load.get(d, 0) > params.n_ru_max:
            if expired():
                return out
            candidates = sorted(
                (s for s, dd in site_du.items() if dd == d),
                key=lambda s: (len(groups[s]), s),
            )
            if not candidates:
                break
            s_light = candidates[0]
            load = len(groups[s_light])
            order = np.argsort(inst.dist_ds[:, s_light], kind="stable")
            target = next(
                (int(t) for t in order
                 if int(t) != d and du_load.get(int(t), 0) + load <= params.n_ru_max),
                None,
            )
            if target is None:
                break
            out.d_assign[s_light] = target
            site_du[s_light] = target
            du_load[d] -= load
            du_load[target] = du_load.get(target, 0) + load
    return out


def _reproduce(
    scored: list,
    cfg: GaConfig,
    rng: np.random.Generator,
    inst: NetworkInstance,
    params: PhysicalParams,
    scenario: Scenario,
    knn_s: np.ndarray,
    knn_d: np.ndarray,
    deadline: Deadline,
) -> Optional[list[Chromosome]]:
    """Next generation from a fitness-sorted population; None when time ran out.

    ``scored`` rows are (j, original_index, chromosome, decode) sorted
    ascending, so sampling positions uniformly and keeping the minimum
    is a k-way tournament with ties resolved toward the lowest original
    index. The elite block is carried over verbatim.
    """
    nr, ns = inst.n_rus, inst.n_splitters
    k_s, k_d = knn_s.shape[1], knn_d.shape[1]
    elite_n = math.ceil(cfg.elite_fraction * cfg.pop_size)
    next_pop = [scored[i][2].copy() for i in range(min(elite_n, len(scored)))]
    while len(next_pop) < cfg.pop_size:
        if deadline.expired():
            return None
        idx1 = int(min(rng.integers(0, len(scored), size=cfg.tournament_k)))
        idx2 = int(min(rng.integers(0, len(scored), size=cfg.tournament_k)))
        c1 = scored[idx1][2].copy()
        c2 = scored[idx2][2].copy()
        if rng.random() < cfg.p_crossover:
            mask = rng.random(nr) < 0.5
            c1.s_assign[mask], c2.s_assign[mask] = (
                c2.s_assign[mask].copy(), c1.s_assign[mask].copy(),
            )
        if rng.random() < cfg.p_crossover:
            mask = rng.random(ns) < 0.5
            c1.d_assign[mask], c2.d_assign[mask] = (
                c2.d_assign[mask].copy(), c1.d_assign[mask].copy(),
            )
        for child in (c1, c2):
            mut_r = rng.random(nr) < cfg.p_mut_ru
            if mut_r.any():
                rows = np.nonzero(mut_r)[0]
                child.s_assign[rows] = knn_s[rows, rng.integers(0, k_s, size=rows.size)]
            mut_s = rng.random(ns) < cfg.p_mut_sd
            if mut_s.any():
                rows = np.nonzero(mut_s)[0]
                child.d_assign[rows] = knn_d[rows, rng.integers(0, k_d, size=rows.size)]
            if rng.random() < cfg.p_repair:
                repaired = repair(
                    child, inst, params, scenario, rng=rng,
                    knn_splitters=knn_s, knn_dus=knn_d,
                    ru_fraction=cfg.repair_ru_fraction, deadline=deadline,
                )
                child.s_assign = repaired.s_assign
                child.d_assign = repaired.d_assign
            next_pop.append(child)
    return next_pop[: cfg.pop_size]


def _chromosome_from_solution(sol: Solution, inst: NetworkInstance,
                              knn_dus: np.ndarray) -> Chromosome:
    s_assign = np.array([s for (_, s, _) in sol.assignment], dtype=np.int64)
    d_assign = knn_dus[:, 0].astype(np.int64).copy()
    for (d, s, _) in sol.assignment:
        d_assign[s] = d
    return Chromosome(s_assign, d_assign)


def evolve(
    inst: NetworkInstance,
    params: PhysicalParams,
    catalog: CostCatalog,
    scenario: Scenario,
    cfg: GaConfig,
    seed_solution: Optional[Solution] = None,
    seed_fraction: float = 0.1,
) -> tuple[SolverOutcome, list[dict]]:
    """Run the restart-wrapped generational loop; never raises on infeasibility.

    Returns the best feasible solution found (exact-cost ranked), or an
    infeasible marker carrying the best decoded state by fitness. The
    wall-clock budget is polled inside evaluation and reproduction;
    generation patience ends a restart, restart patience ends the run.
    """
    rng = np.random.default_rng(cfg.seed)
    deadline = Deadline(cfg.t_run_s)
    knn_s, knn_d = nearest_neighbor_sets(inst, cfg.knn)
    nr, ns = inst.n_rus, inst.n_splitters
    k_s, k_d = knn_s.shape[1], knn_d.shape[1]

    def decode(chrom: Chromosome) -> DecodeResult:
        return decode_and_score(
            chrom, inst, params, catalog, scenario,
            active_site_weight=cfg.active_site_weight,
            hard_penalty=cfg.hard_penalty,
            soft_penalty=cfg.soft_penalty,
        )

    def random_chromosome() -> Chromosome:
        s_assign = knn_s[np.arange(nr), rng.integers(0, k_s, size=nr)].astype(np.int64)
        d_assign = knn_d[np.arange(ns), rng.integers(0, k_d, size=ns)].astype(np.int64)
        return Chromosome(s_assign, d_assign)

    best_feasible_cost = math.inf
    best_any_j = math.inf
    best_result: Optional[DecodeResult] = None
    best_is_feasible = False
    generation = 0
    trace: list[dict] = []

    def record_candidate(res: DecodeResult) -> bool:
        """Fold a decoded individual into the global best; True on improvement."""
        nonlocal best_feasible_cost, best_any_j, best_result, best_is_feasible
        improved = False
        feasible = res.tally.is_clean and check_solution(
            inst, params, catalog, scenario, res.solution
        ).ok
        if feasible:
            if res.breakdown.total < best_feasible_cost - cfg.epsilon or not best_is_feasible:
                if res.breakdown.total < best_feasible_cost:
                    best_feasible_cost = res.breakdown.total
                    best_result = res
                    improved = True
                best_is_feasible = True
        elif not best_is_feasible and res.j < best_any_j - cfg.epsilon:
            best_result = res
            improved = True
        best_any_j = min(best_any_j, res.j)
        return improved

    def emit_trace() -> None:
        trace.append({
            "generation": generation,
            "best_j": best_any_j if best_any_j < math.inf else "",
            "best_true_cost": best_feasible_cost if best_is_feasible else "",
            "feasible": best_is_feasible,
            "elapsed_s": round(deadline.elapsed(), 6),
        })

    restarts_no_improve = 0
    out_of_time = deadline.expired()
    while not out_of_time:
        population = [random_chromosome() for _ in range(cfg.pop_size)]
        if seed_solution is not None:
            seeded = _chromosome_from_solution(seed_solution, inst, knn_d)
            for i in range(max(1, int(seed_fraction * cfg.pop_size))):
                population[i] = seeded.copy()

        restart_best_j = math.inf
        gens_no_improve = 0
        restart_improved = False

        for _ in range(cfg.max_generations):
            if deadline.expired():
                out_of_time = True
                break
            scored: list[tuple[float, int, Chromosome, DecodeResult]] = []
            for i, chrom in enumerate(population):
                if deadline.expired():
                    out_of_time = True
                    break
                res = decode(chrom)
                scored.append((res.j, i, chrom, res))
            if out_of_time or not scored:
                break

            scored.sort(key=lambda x: (x[0], x[1]))
            gen_best = scored[0]
            if gen_best[0] < restart_best_j - cfg.epsilon:
                restart_best_j = gen_best[0]
                gens_no_improve = 0
            else:
                gens_no_improve += 1
            if record_candidate(gen_best[3]):
                restart_improved = True
            emit_trace()
            generation += 1

            if gens_no_improve >= cfg.patience:
                break

            next_pop = _reproduce(
                scored, cfg, rng, inst, params, scenario, knn_s, knn_d, deadline,
            )
            if next_pop is None:
                out_of_time = True
                break
            population = next_pop

        if out_of_time:
            break
        if restart_improved:
            restarts_no_improve = 0
        else:
            restarts_no_improve += 1
        if restarts_no_improve >= cfg.patience:
            break

    if best_result is None:
        outcome = SolverOutcome(
            feasible=False, solution=None, breakdown=None, best_cost=None,
            iterations=generation, elapsed_s=deadline.elapsed(),
            best_objective=None, failure="no-candidate-evaluated",
        )
    else:
        outcome = SolverOutcome(
            feasible=best_is_feasible,
            solution=best_result.solution,
            breakdown=best_result.breakdown,
            best_cost=best_result.breakdown.total if best_is_feasible else None,
            iterations=generation,
            elapsed_s=deadline.elapsed(),
            best_objective=best_result.j,
            failure=None if best_is_feasible else "best-is-infeasible",
        )
    return outcome, trace
