"""Hierarchical clustering solver: RU clusters pick splitter sites, weighted
splitter clusters pick DU sites, then every path is verified and dimensioned.

Cluster counts start from closed-form estimates and escalate one at a
time, attributed to whichever constraint family rejected the attempt:
splitter-side failures (latency) bump the RU cluster count, DU-side
failures (optical reach, DU overload, final check) bump the DU cluster
count. Retries at a fixed count pair rerun the clustering with fresh
substreams.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..costing import check_solution, compute_tco, min_du_level
from ..types import CostCatalog, NetworkInstance, PhysicalParams, Scenario, Solution
from .common import Deadline, SolverOutcome

__all__ = [
    "KmcConfig",
    "dimension_group",
    "initial_cluster_counts",
    "kmeans",
    "solve_kmc",
]

_US_PER_S = 1.0e6
_M_PER_KM = 1000.0

FAIL_KS = "KS"
FAIL_KD = "KD"


@dataclass(frozen=True)
class KmcConfig:
    i_km: int = 100          # max Lloyd iterations
    eps_km: float = 1.0      # center-movement tolerance, meters
    i_inner: int = 5         # retries per (K_S, K_D)
    replication_cap: int = 8
    t_run_s: float = 1000.0
    patience: int = 1200
    epsilon: float = 1.0e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.i_km < 1:
            raise ValueError("i_km must be >= 1")
        if self.replication_cap < 1:
            raise ValueError("replication_cap must be >= 1")
        if self.i_inner < 1:
            raise ValueError("i_inner must be >= 1")


def kmeans(
    points: np.ndarray,
    k: int,
    i_km: int = 100,
    eps_km: float = 1.0,
    seed: int | np.random.Generator = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Plain Lloyd iteration with k-means++ seeding.

    Stops when no center moves more than ``eps_km`` or after ``i_km``
    rounds. Emptied clusters are re-seeded onto a random input point.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    centers = np.empty((k, 2), dtype=np.float64)
    centers[0] = points[int(rng.integers(0, n))]
    for i in range(1, k):
        d2 = np.min(((points[:, None, :] - centers[None, :i, :]) ** 2).sum(axis=2), axis=1)
        total = d2.sum()
        if total <= 0.0:
            centers[i] = points[int(rng.integers(0, n))]
        else:
            centers[i] = points[int(rng.choice(n, p=d2 / total))]

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(i_km):
        dist2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(dist2, axis=1)
        moved = 0.0
        for c in range(k):
            members = points[labels == c]
            if members.shape[0] == 0:
                new_center = points[int(rng.integers(0, n))]
            else:
                new_center = members.mean(axis=0)
            moved = max(moved, float(np.linalg.norm(new_center - centers[c])))
            centers[c] = new_center
        if moved <= eps_km:
            break
    dist2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(dist2, axis=1)
    return centers, labels


def initial_cluster_counts(n_rus: int, splitter_types: tuple[int, ...],
                           n_ru_max: int) -> tuple[int, int]:
    """Starting (K_S, K_D): RU count over mean fan-out, and over half the DU cap."""
    mean_fanout = sum(2 ** t for t in splitter_types) / len(splitter_types)
    k_s = math.ceil(n_rus / mean_fanout)
    k_d = math.ceil(n_rus / (n_ru_max / 2))
    return k_s, k_d


def dimension_group(n_rus_on_site: int, t_feasible: int) -> tuple[int, int]:
    """(type, unit count) for a splitter group: demand-driven but loss-capped."""
    t_need = max(1, math.ceil(math.log2(n_rus_on_site)))
    t_star = min(t_need, t_feasible)
    return t_star, math.ceil(n_rus_on_site / 2 ** t_star)


def _nearest_site(xy: np.ndarray, sites_xy: np.ndarray) -> int:
    return int(np.argmin(((sites_xy - xy) ** 2).sum(axis=1)))


def _attempt(
    inst: NetworkInstance,
    params: PhysicalParams,
    catalog: CostCatalog,
    scenario: Scenario,
    cfg: KmcConfig,
    k_s: int,
    k_d: int,
    rng: np.random.Generator,
):
    """One clustering attempt; returns (solution, breakdown) or (None, fail_code)."""
    # splitter siting from RU clusters
    centroids, labels = kmeans(inst.ru_xy, k_s, cfg.i_km, cfg.eps_km, rng)
    cluster_site = [_nearest_site(centroids[c], inst.splitter_xy) for c in range(k_s)]
    s_of_r = np.array([cluster_site[labels[r]] for r in range(inst.n_rus)], dtype=np.int64)
    active_sites = sorted(set(int(s) for s in s_of_r))
    if not active_sites:
        return None, FAIL_KS

    # DU siting from replicated active splitters
    site_rus: dict[int, list[int]] = {s: [] for s in active_sites}
    for r, s in enumerate(s_of_r):
        site_rus[int(s)].append(r)
    rep_points = []
    rep_site = []
    for s in active_sites:
        copies = min(len(site_rus[s]), cfg.replication_cap)
        for _ in range(copies):
            rep_points.append(inst.splitter_xy[s])
            rep_site.append(s)
    rep_points = np.asarray(rep_points)
    k_d_eff = min(k_d, rep_points.shape[0])
    centers, _ = kmeans(rep_points, k_d_eff, cfg.i_km, cfg.eps_km, rng)
    active_dus = sorted({_nearest_site(centers[c], inst.du_xy) for c in range(k_d_eff)})
    if not active_dus:
        return None, FAIL_KD
    active_du_xy = inst.du_xy[active_dus]
    d_of_s = {
        s: active_dus[_nearest_site(inst.splitter_xy[s], active_du_xy)]
        for s in active_sites
    }

    # verification and dimensioning on worst-case path lengths
    site_type: dict[int, int] = {}
    site_units: dict[int, int] = {}
    for s in active_sites:
        d = d_of_s[s]
        d_total = float(inst.dist_ds[d, s]) + max(
            float(inst.dist_sr[s, r]) for r in site_rus[s]
        )
        worst_proc = max(inst.rus[r].proc_latency_us for r in site_rus[s])
        if d_total / params.v_fiber * _US_PER_S + worst_proc > scenario.t_fh_us:
            return None, FAIL_KS
        loss_base = params.l_fib * d_total / _M_PER_KM + params.l_fix + params.l_margin
        t_feas = next(
            (t for t in reversed(params.splitter_types)
             if loss_base + params.splitter_loss(t) <= params.l_budget),
            None,
        )
        if t_feas is None:
            return None, FAIL_KD
        site_type[s], site_units[s] = dimension_group(len(site_rus[s]), t_feas)

    du_loads: dict[int, int] = {}
    for s in active_sites:
        du_loads[d_of_s[s]] = du_loads.get(d_of_s[s], 0) + len(site_rus[s])
    if any(load > params.n_ru_max for load in du_loads.values()):
        return None, FAIL_KD

    assignment = [(d_of_s[int(s_of_r[r])], int(s_of_r[r]), site_type[int(s_of_r[r])])
                  for r in range(inst.n_rus)]
    du_active = [False] * inst.n_dus
    du_level: list[Optional[int]] = [None] * inst.n_dus
    for d, load in du_loads.items():
        du_active[d] = True
        du_level[d] = min_du_level(load, params)
    solution = Solution(
        assignment=tuple(assignment),
        splitter_counts={(d_of_s[s], s, site_type[s]): site_units[s] for s in active_sites},
        feeder={(d_of_s[s], s): True for s in active_sites},
        du_active=tuple(du_active),
        du_level=tuple(du_level),
    )
    if not check_solution(inst, params, catalog, scenario, solution).ok:
        return None, FAIL_KD
    return (solution, compute_tco(inst, params, catalog, solution)), None


def solve_kmc(
    inst: NetworkInstance,
    params: PhysicalParams,
    catalog: CostCatalog,
    scenario: Scenario,
    cfg: KmcConfig,
) -> tuple[SolverOutcome, list[dict]]:
    """Escalating clustering search; infeasibility comes back as a marker.

    Each pass runs ``i_inner`` attempts at the current (K_S, K_D). A
    failing batch bumps the count blamed by the majority of its
    failures (ties bump K_S); if the blamed count is already maxed the
    other one is bumped, and the search stops when both are maxed, on
    the wall-clock budget, or after ``patience`` consecutive feasible
    evaluations without improvement.
    """
    deadline = Deadline(cfg.t_run_s)
    seed_root = np.random.SeedSequence(cfg.seed)
    k_s, k_d = initial_cluster_counts(inst.n_rus, params.splitter_types, params.n_ru_max)
    k_s_max = min(inst.n_splitters, inst.n_rus)
    k_d_max = inst.n_dus
    k_s = min(k_s, k_s_max)
    k_d = min(k_d, k_d_max)

    best: Optional[tuple[Solution, float]] = None
    best_breakdown = None
    no_improve = 0
    attempt = 0
    last_fail: Optional[str] = None
    trace: list[dict] = []
    stopped = False

    while not deadline.expired() and not stopped:
        batch_fails: list[str] = []
        for _ in range(cfg.i_inner):
            if deadline.expired():
                break
            attempt += 1
            rng = np.random.Generator(np.random.PCG64(seed_root.spawn(1)[0]))
            result, fail = _attempt(inst, params, catalog, scenario, cfg, k_s, k_d, rng)
            if result is None:
                batch_fails.append(fail)
                last_fail = fail
                trace.append({
                    "attempt": attempt, "k_s": k_s, "k_d": k_d,
                    "outcome": f"fail_{fail}", "cost": "",
                    "elapsed_s": round(deadline.elapsed(), 6),
                })
                continue
            solution, breakdown = result
            trace.append({
                "attempt": attempt, "k_s": k_s, "k_d": k_d,
                "outcome": "feasible", "cost": breakdown.total,
                "elapsed_s": round(deadline.elapsed(), 6),
            })
            if best is None or breakdown.total < best[1] - cfg.epsilon:
                best = (solution, breakdown.total)
                best_breakdown = breakdown
                no_improve = 0
            else:
                no_improve += 1
            if no_improve >= cfg.patience:
                stopped = True
                break
        if stopped or deadline.expired():
            break
        if not batch_fails:
            continue
        counts = Counter(batch_fails)
        blamed = FAIL_KS if counts[FAIL_KS] >= counts[FAIL_KD] else FAIL_KD
        if blamed == FAIL_KS:
            if k_s < k_s_max:
                k_s += 1
            elif k_d < k_d_max:
                k_d += 1
            else:
                break
        else:
            if k_d < k_d_max:
                k_d += 1
            elif k_s < k_s_max:
                k_s += 1
            else:
                break

    if best is None:
        outcome = SolverOutcome(
            feasible=False, solution=None, breakdown=None, best_cost=None,
            iterations=attempt, elapsed_s=deadline.elapsed(),
            failure=last_fail or FAIL_KS,
        )
    else:
        outcome = SolverOutcome(
            feasible=True, solution=best[0], breakdown=best_breakdown,
            best_cost=best[1], iterations=attempt, elapsed_s=deadline.elapsed(),
        )
    return outcome, trace
