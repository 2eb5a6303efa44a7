import math

import numpy as np
import pytest

from ponbench.costing import check_solution
from ponbench.ilp import brute_force_optimal
from ponbench.presets import SCENARIOS, physical_params_for
from ponbench.solvers.kmc import (
    KmcConfig,
    dimension_group,
    initial_cluster_counts,
    kmeans,
    solve_kmc,
)
from ponbench.types import NetworkInstance, Point2D, RU, Scenario

from conftest import make_instance


def test_kmeans_k_equals_n_gives_zero_inertia():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1000, size=(8, 2))
    centers, labels = kmeans(pts, 8, seed=1)
    assert sorted(labels.tolist()) == list(range(8))
    d = np.linalg.norm(pts - centers[labels], axis=1)
    assert d.max() == pytest.approx(0.0, abs=1e-9)


def test_kmeans_single_cluster_is_centroid():
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 1000, size=(20, 2))
    centers, labels = kmeans(pts, 1, seed=2)
    assert set(labels.tolist()) == {0}
    assert centers[0] == pytest.approx(pts.mean(axis=0), abs=1e-6)


def test_kmeans_recovers_separated_blobs():
    rng = np.random.default_rng(2)
    blob_a = rng.uniform(-1, 1, size=(10, 2)) + np.array([0.0, 0.0])
    blob_b = rng.uniform(-1, 1, size=(10, 2)) + np.array([10000.0, 0.0])
    pts = np.vstack([blob_a, blob_b])
    centers, labels = kmeans(pts, 2, seed=3)
    got = {tuple(np.round(c, 0)) for c in centers}
    want = {tuple(np.round(blob_a.mean(axis=0), 0)), tuple(np.round(blob_b.mean(axis=0), 0))}
    for center in centers:
        nearest_blob = min(
            (np.linalg.norm(center - blob_a.mean(axis=0)),
             np.linalg.norm(center - blob_b.mean(axis=0)))
        )
        assert nearest_blob <= 1.0
    assert (labels[:10] == labels[0]).all()
    assert (labels[10:] == labels[10]).all()
    assert labels[0] != labels[10]


def test_kmeans_argument_errors():
    pts = np.zeros((3, 2))
    with pytest.raises(ValueError):
        kmeans(pts, 0)
    with pytest.raises(ValueError):
        kmeans(pts, 4)


def test_initial_counts_formula():
    # 100 RUs, types {1,2,3}: mean fan-out 14/3, so ceil(100 / 4.667) = 22
    assert initial_cluster_counts(100, (1, 2, 3), 64) == (22, 4)
    assert initial_cluster_counts(20, (1, 2, 3, 4, 5), 64) == (2, 1)


def test_dimensioning_rule():
    assert dimension_group(10, 4) == (4, 1)       # ceil(log2 10) = 4
    assert dimension_group(1, 3) == (1, 1)        # at least type 1
    assert dimension_group(10, 2) == (2, 3)       # loss-capped, 3 units of 4 ports
    assert dimension_group(64, 6) == (6, 1)


def test_solve_small_instance_feasible_and_checked(catalog, scenario4):
    params = physical_params_for(scenario4)
    rng = np.random.default_rng(4)
    inst = make_instance(rng, scenario4, 2, 5, 6, side=4000.0)
    cfg = KmcConfig(t_run_s=20.0, patience=8, i_inner=3, seed=21)
    outcome, trace = solve_kmc(inst, params, catalog, scenario4, cfg)
    assert outcome.feasible
    assert check_solution(inst, params, catalog, scenario4, outcome.solution).ok
    oracle = brute_force_optimal(inst, params, catalog, scenario4)
    assert outcome.best_cost >= oracle[1].total - 1e-6
    assert any(row["outcome"] == "feasible" for row in trace)


def test_solve_deterministic(catalog, scenario4):
    params = physical_params_for(scenario4)
    rng = np.random.default_rng(6)
    inst = make_instance(rng, scenario4, 2, 5, 8, side=4000.0)
    cfg = KmcConfig(t_run_s=20.0, patience=6, i_inner=2, seed=9)
    out1, trace1 = solve_kmc(inst, params, catalog, scenario4, cfg)
    out2, trace2 = solve_kmc(inst, params, catalog, scenario4, cfg)
    assert out1.feasible == out2.feasible
    assert out1.best_cost == out2.best_cost
    if out1.feasible:
        assert out1.solution == out2.solution


def test_all_latency_infeasible_returns_ks_marker(catalog):
    scenario = SCENARIOS["s2"]
    params = physical_params_for(scenario)
    # both RUs are 20+ km from every splitter-DU combination
    inst = NetworkInstance.from_points(
        [Point2D(0, 0)], [Point2D(100, 0)],
        [RU(Point2D(30000, 0), 2.0, 25.0), RU(Point2D(31000, 0), 2.0, 25.0)],
    )
    cfg = KmcConfig(t_run_s=2.0, patience=5, i_inner=2, seed=1)
    outcome, trace = solve_kmc(inst, params, catalog, scenario, cfg)
    assert not outcome.feasible
    assert outcome.solution is None
    assert outcome.failure == "KS"
    assert all(row["outcome"] == "fail_KS" for row in trace)


def test_du_capacity_exhaustion_returns_kd_marker(catalog):
    # 70 co-located RUs on a single DU: over any level's capacity
    scenario = Scenario(
        name="capacity-stress", bw_per_ru=2.0, t_proc_us=25.0, t_fh_us=100.0,
        max_split_ratio=8, map_side_m=3000.0, nd_sweep=(1,), nr_sweep=(70,),
        splitter_spacing_m=500.0,
    )
    params = physical_params_for(scenario)
    rng = np.random.default_rng(13)
    inst = make_instance(rng, scenario, 1, 4, 70, side=2000.0)
    cfg = KmcConfig(t_run_s=5.0, patience=10, i_inner=2, seed=2)
    outcome, _ = solve_kmc(inst, params, catalog, scenario, cfg)
    assert not outcome.feasible
    assert outcome.failure == "KD"


def test_cluster_counts_never_decrease(catalog, scenario2):
    params = physical_params_for(scenario2)
    rng = np.random.default_rng(15)
    # tight latency forces escalation before success or exhaustion
    inst = make_instance(rng, scenario2, 2, 6, 12)
    cfg = KmcConfig(t_run_s=5.0, patience=6, i_inner=2, seed=3)
    _, trace = solve_kmc(inst, params, catalog, scenario2, cfg)
    ks = [row["k_s"] for row in trace]
    kd = [row["k_d"] for row in trace]
    assert ks == sorted(ks)
    assert kd == sorted(kd)
