"""Shared fixtures and the independent enumeration oracle used for cross-checks."""
from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from ponbench.costing import compute_tco, min_du_level, path_latency_us, path_loss_db
from ponbench.presets import DEFAULT_CATALOG, SCENARIOS, physical_params_for
from ponbench.types import NetworkInstance, Point2D, RU, Scenario, Solution


@pytest.fixture(scope="session")
def catalog():
    return DEFAULT_CATALOG


@pytest.fixture(scope="session")
def scenario1():
    return SCENARIOS["s1"]


@pytest.fixture(scope="session")
def scenario2():
    return SCENARIOS["s2"]


@pytest.fixture(scope="session")
def scenario4():
    return SCENARIOS["s4"]


def make_instance(rng: np.random.Generator, scenario: Scenario, n_du: int,
                  n_s: int, n_ru: int, side: float | None = None) -> NetworkInstance:
    """Random instance on the scenario's map (demand/latency from the scenario)."""
    side = side if side is not None else scenario.map_side_m
    dus = [Point2D(*rng.uniform(0, side, 2)) for _ in range(n_du)]
    sites = [Point2D(*rng.uniform(0, side, 2)) for _ in range(n_s)]
    rus = [RU(Point2D(*rng.uniform(0, side, 2)), scenario.bw_per_ru, scenario.t_proc_us)
           for _ in range(n_ru)]
    return NetworkInstance.from_points(dus, sites, rus, seed=int(rng.integers(2 ** 32)))


@pytest.fixture(scope="session")
def worked_fixture(scenario1):
    """Hand-derived two-RU deployment with a known exact cost breakdown."""
    params = physical_params_for(scenario1)
    inst = NetworkInstance.from_points(
        [Point2D(0.0, 0.0)],
        [Point2D(1000.0, 0.0)],
        [
            RU(Point2D(1000.0, 500.0), 1.0, scenario1.t_proc_us),
            RU(Point2D(1000.0, -500.0), 1.0, scenario1.t_proc_us),
        ],
    )
    sol = Solution(
        assignment=((0, 0, 1), (0, 0, 1)),
        splitter_counts={(0, 0, 1): 1},
        feeder={(0, 0): True},
        du_active=(True,),
        du_level=(1,),
    )
    return inst, params, sol


def naive_optimal(inst, params, catalog, scenario):
    """Literal product enumeration over per-RU (d, s, t) choices.

    Independent of the subset-DP oracle; only usable on very small
    instances. Returns the minimal total cost or None.
    """
    nd, ns, nr = inst.n_dus, inst.n_splitters, inst.n_rus
    choices = []
    for r in range(nr):
        feasible = []
        for d in range(nd):
            for s in range(ns):
                if path_latency_us(inst, params, d, s, r) > scenario.t_fh_us:
                    continue
                for t in params.splitter_types:
                    if path_loss_db(inst, params, d, s, r, t) <= params.l_budget:
                        feasible.append((d, s, t))
        if not feasible:
            return None
        choices.append(feasible)

    best = None
    for combo in itertools.product(*choices):
        loads_dst: dict[tuple[int, int, int], int] = {}
        du_loads: dict[int, int] = {}
        for (d, s, t) in combo:
            loads_dst[(d, s, t)] = loads_dst.get((d, s, t), 0) + 1
            du_loads[d] = du_loads.get(d, 0) + 1
        if any(load > params.n_ru_max for load in du_loads.values()):
            continue
        counts = {k: math.ceil(v / 2 ** k[2]) for k, v in loads_dst.items()}
        feeder = {(d, s): True for (d, s, _) in counts}
        du_active = [False] * nd
        du_level = [None] * nd
        for d, load in du_loads.items():
            du_active[d] = True
            du_level[d] = min_du_level(load, params)
        sol = Solution(
            assignment=combo, splitter_counts=counts, feeder=feeder,
            du_active=tuple(du_active), du_level=tuple(du_level),
        )
        total = compute_tco(inst, params, catalog, sol).total
        if best is None or total < best:
            best = total
    return best


def random_solution(rng: np.random.Generator, inst, params) -> Solution:
    """Structurally valid but usually constraint-violating solution."""
    nd, ns = inst.n_dus, inst.n_splitters
    types = params.splitter_types
    assignment = tuple(
        (int(rng.integers(nd)), int(rng.integers(ns)),
         int(types[rng.integers(len(types))]))
        for _ in range(inst.n_rus)
    )
    counts: dict[tuple[int, int, int], int] = {}
    for (d, s, t) in assignment:
        if rng.random() < 0.7:
            counts[(d, s, t)] = int(rng.integers(0, 3))
    for _ in range(rng.integers(0, 3)):
        counts[(int(rng.integers(nd)), int(rng.integers(ns)),
                int(types[rng.integers(len(types))]))] = int(rng.integers(0, 3))
    feeder = {}
    for (d, s, _) in counts:
        if rng.random() < 0.8:
            feeder[(d, s)] = True
    du_active = tuple(bool(rng.random() < 0.7) for _ in range(nd))
    du_level = tuple(
        int(rng.integers(len(params.du_levels))) if rng.random() < 0.8 else None
        for _ in range(nd)
    )
    return Solution(
        assignment=assignment, splitter_counts=counts, feeder=feeder,
        du_active=du_active, du_level=du_level,
    )
