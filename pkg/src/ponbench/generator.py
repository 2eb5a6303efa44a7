"""Reproducible instance generation.

Positions are drawn from PCG64 streams split by role so DU sites stay
fixed while topologies vary: the DU stream is keyed by
(master_seed, scenario digest, n_du, n_ru) and the RU stream
additionally by topology_index. Splitter sites are not random; they
form an axis-aligned grid anchored at the map origin, boundary rows
and columns included.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .presets import scenario_digest
from .types import NetworkInstance, Point2D, RU, Scenario

__all__ = ["DegenerateGridError", "GeneratorConfig", "generate_instance", "grid_splitter_sites"]

_ROLE_DU = 0
_ROLE_RU = 1


class DegenerateGridError(ValueError):
    """Splitter grid pitch exceeds the map side."""


@dataclass(frozen=True)
class GeneratorConfig:
    scenario: Scenario
    n_du: int
    n_ru: int
    topology_index: int = 0
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_du not in self.scenario.nd_sweep:
            raise ValueError(f"n_du={self.n_du} not in scenario sweep {self.scenario.nd_sweep}")
        if self.n_ru not in self.scenario.nr_sweep:
            raise ValueError(f"n_ru={self.n_ru} not in scenario sweep {self.scenario.nr_sweep}")
        if self.topology_index < 0:
            raise ValueError("topology_index must be >= 0")
        if not (0 <= self.master_seed < 2 ** 64):
            raise ValueError("master_seed must fit in 64 unsigned bits")


def grid_splitter_sites(map_side_m: float, spacing_m: float) -> tuple[Point2D, ...]:
    """Grid points (i*spacing, j*spacing) covering the map, row-major order.

    Both boundaries are included: the number of points per axis is
    floor(map_side / spacing) + 1.
    """
    if spacing_m <= 0:
        raise ValueError(f"spacing must be positive, got {spacing_m}")
    if map_side_m <= 0:
        raise ValueError(f"map side must be positive, got {map_side_m}")
    per_axis = int(map_side_m / spacing_m) + 1
    return tuple(
        Point2D(i * spacing_m, j * spacing_m)
        for i in range(per_axis)
        for j in range(per_axis)
    )


def _stream(cfg: GeneratorConfig, role: int, topology: int | None = None) -> np.random.Generator:
    entropy = [cfg.master_seed, scenario_digest(cfg.scenario), cfg.n_du, cfg.n_ru, role]
    if topology is not None:
        entropy.append(topology)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def _uniform_points(rng: np.random.Generator, n: int, side: float) -> list[Point2D]:
    xy = rng.uniform(0.0, side, size=(n, 2))
    return [Point2D(float(x), float(y)) for x, y in xy]


def generate_instance(cfg: GeneratorConfig) -> NetworkInstance:
    """Generate one topology: fixed DU sites, per-topology RUs, grid splitters.

    Pure function of its config: calling it twice yields byte-identical
    instances, and two configs differing only in topology_index share
    the exact same DU coordinates.
    """
    sc = cfg.scenario
    if sc.splitter_spacing_m > sc.map_side_m:
        raise DegenerateGridError(
            f"splitter spacing {sc.splitter_spacing_m} m exceeds map side {sc.map_side_m} m"
        )
    du_sites = _uniform_points(_stream(cfg, _ROLE_DU), cfg.n_du, sc.map_side_m)
    ru_rng = _stream(cfg, _ROLE_RU, cfg.topology_index)
    rus = [
        RU(position=p, demand_gbps=sc.bw_per_ru, proc_latency_us=sc.t_proc_us)
        for p in _uniform_points(ru_rng, cfg.n_ru, sc.map_side_m)
    ]
    sites = grid_splitter_sites(sc.map_side_m, sc.splitter_spacing_m)
    seed_seq = np.random.SeedSequence(
        [cfg.master_seed, scenario_digest(sc), cfg.n_du, cfg.n_ru, cfg.topology_index]
    )
    instance_seed = int(seed_seq.generate_state(1, dtype=np.uint64)[0])
    return NetworkInstance.from_points(du_sites, sites, rus, seed=instance_seed)
