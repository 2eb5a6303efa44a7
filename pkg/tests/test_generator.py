import math

import numpy as np
import pytest

from ponbench.generator import (
    DegenerateGridError,
    GeneratorConfig,
    generate_instance,
    grid_splitter_sites,
)
from ponbench.presets import SCENARIOS
from ponbench.types import Scenario, canonical_json, validate_instance


def test_grid_counts():
    # (floor(side/spacing) + 1)^2 points, both boundaries included
    assert len(grid_splitter_sites(5000, 5000)) == 4
    assert len(grid_splitter_sites(10000, 500)) == 441
    assert len(grid_splitter_sites(5000, 150)) == 1156
    assert len(grid_splitter_sites(20000, 2000)) == 121


def test_grid_layout_row_major_and_in_bounds():
    pts = grid_splitter_sites(1000, 400)
    assert [(p.x, p.y) for p in pts[:3]] == [(0, 0), (0, 400), (0, 800)]
    assert all(0 <= p.x <= 1000 and 0 <= p.y <= 1000 for p in pts)
    assert len(set((p.x, p.y) for p in pts)) == len(pts)


def test_grid_coverage_radius():
    spacing = 700.0
    side = 5000.0
    pts = np.array([[p.x, p.y] for p in grid_splitter_sites(side, spacing)])
    rng = np.random.default_rng(3)
    probes = rng.uniform(0, side, size=(500, 2))
    d = np.sqrt(((probes[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
    # interior points sit within half a cell diagonal; the strip past the
    # last grid line (side % spacing wide) is still within one diagonal
    assert d.max() <= spacing * math.sqrt(2)
    interior = probes.max(axis=1) <= (side // spacing) * spacing
    assert d[interior].max() <= spacing * math.sqrt(2) / 2 + 1e-9


def test_grid_argument_errors():
    with pytest.raises(ValueError):
        grid_splitter_sites(1000, 0)
    with pytest.raises(ValueError):
        grid_splitter_sites(1000, -5)


def test_generate_is_pure_and_byte_identical(scenario4):
    cfg = GeneratorConfig(scenario=scenario4, n_du=3, n_ru=50, topology_index=2,
                          master_seed=99)
    a = generate_instance(cfg)
    b = generate_instance(cfg)
    assert canonical_json(a.to_dict()) == canonical_json(b.to_dict())
    assert validate_instance(a) == []


def test_du_sites_fixed_across_topologies(scenario4):
    base = dict(scenario=scenario4, n_du=3, n_ru=50, master_seed=7)
    t0 = generate_instance(GeneratorConfig(topology_index=0, **base))
    t1 = generate_instance(GeneratorConfig(topology_index=1, **base))
    assert t0.du_sites == t1.du_sites
    assert t0.rus != t1.rus
    assert t0.splitter_sites == t1.splitter_sites


def test_ru_uniformity_quadrants(scenario1):
    sc = Scenario(
        name="uniformity-probe", bw_per_ru=1.0, t_proc_us=300.0, t_fh_us=5000.0,
        max_split_ratio=64, map_side_m=20000.0, nd_sweep=(1,),
        nr_sweep=(20000,), splitter_spacing_m=2000.0,
    )
    inst = generate_instance(GeneratorConfig(scenario=sc, n_du=1, n_ru=20000,
                                             master_seed=11))
    xy = inst.ru_xy
    half = sc.map_side_m / 2
    for qx in (0, 1):
        for qy in (0, 1):
            frac = np.mean(
                ((xy[:, 0] >= qx * half) & (xy[:, 0] < (qx + 1) * half)
                 & (xy[:, 1] >= qy * half) & (xy[:, 1] < (qy + 1) * half))
            )
            assert abs(frac - 0.25) <= 0.02


def test_scenario1_grid_count(scenario1):
    inst = generate_instance(GeneratorConfig(scenario=scenario1, n_du=1, n_ru=20,
                                             master_seed=0))
    assert inst.n_splitters == 121


def test_degenerate_grid_error():
    sc = Scenario(
        name="degenerate", bw_per_ru=1.0, t_proc_us=10.0, t_fh_us=100.0,
        max_split_ratio=8, map_side_m=1000.0, nd_sweep=(1,), nr_sweep=(5,),
        splitter_spacing_m=2000.0,
    )
    with pytest.raises(DegenerateGridError):
        generate_instance(GeneratorConfig(scenario=sc, n_du=1, n_ru=5, master_seed=0))


def test_config_sweep_membership(scenario4):
    with pytest.raises(ValueError):
        GeneratorConfig(scenario=scenario4, n_du=4, n_ru=50)  # 4 not in the sweep
    with pytest.raises(ValueError):
        GeneratorConfig(scenario=scenario4, n_du=3, n_ru=51)
