"""Core domain types shared across the toolkit.

Unit conventions: distances are stored in meters, latencies in
microseconds, demands in Gb/s. Catalog prices quoted per km are
converted where costs are computed, never in stored data.

All types are immutable after construction and safe to share across
concurrent workers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

__all__ = [
    "Assignment",
    "CostBreakdown",
    "CostCatalog",
    "NetworkInstance",
    "PhysicalParams",
    "Point2D",
    "RU",
    "Scenario",
    "Solution",
    "UnsatisfiableDemandError",
    "canonical_json",
    "onu_cost_for_demand",
    "validate_instance",
]

# (du_index, splitter_site_index, splitter_type)
Assignment = tuple[int, int, int]


class UnsatisfiableDemandError(ValueError):
    """Demand exceeds every ONU rate in the catalog."""


def canonical_json(payload: Any) -> str:
    """Serialize to a canonical JSON string (sorted keys, no whitespace)."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def distance_to(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Point2D":
        return cls(x=float(d["x"]), y=float(d["y"]))


@dataclass(frozen=True)
class RU:
    """A radio unit and its ONU-side requirements."""

    position: Point2D
    demand_gbps: float
    proc_latency_us: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "demand_gbps", float(self.demand_gbps))
        object.__setattr__(self, "proc_latency_us", float(self.proc_latency_us))
        if self.demand_gbps <= 0:
            raise ValueError(f"demand_gbps must be positive, got {self.demand_gbps}")
        if self.proc_latency_us < 0:
            raise ValueError(f"proc_latency_us must be >= 0, got {self.proc_latency_us}")

    def to_dict(self) -> dict:
        return {
            "position": self.position.to_dict(),
            "demand_gbps": self.demand_gbps,
            "proc_latency_us": self.proc_latency_us,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RU":
        return cls(
            position=Point2D.from_dict(d["position"]),
            demand_gbps=float(d["demand_gbps"]),
            proc_latency_us=float(d["proc_latency_us"]),
        )


@dataclass(frozen=True)
class CostCatalog:
    """Economic parameter set: unit prices, horizons, device tables.

    ``onu_rates`` / ``onu_costs`` form a rate table; an RU is equipped
    with the cheapest ONU whose rate covers its demand. A splitter of
    type t (fan-out 2^t) costs ``splitter_cost_base + t * splitter_cost_per_level``.
    """

    c_df: float        # distribution fiber, $/km
    c_ff: float        # feeder fiber, $/km
    c_tr: float        # trenching, $/km
    c_bp: float        # DU pool installation, $
    c_rent: float      # DU site rent, $/yr
    c_m: float         # annual maintenance fraction of equipment cost
    c_p: float         # $/(W*yr)
    t_op: float        # operating horizon, years
    onu_rates: tuple[float, ...]
    onu_costs: tuple[float, ...]
    splitter_cost_base: float
    splitter_cost_per_level: float
    p_cool: float      # W per active DU site
    p_du: float        # W per unit of DU RU-capacity
    p_ru: float        # W per RU
    p_onu: float       # W per ONU

    def __post_init__(self) -> None:
        numeric = (
            self.c_df, self.c_ff, self.c_tr, self.c_bp, self.c_rent, self.c_m,
            self.c_p, self.t_op, self.splitter_cost_base, self.splitter_cost_per_level,
            self.p_cool, self.p_du, self.p_ru, self.p_onu,
        )
        if any(v < 0 for v in numeric):
            raise ValueError("catalog values must be non-negative")
        object.__setattr__(self, "onu_rates", tuple(float(r) for r in self.onu_rates))
        object.__setattr__(self, "onu_costs", tuple(float(c) for c in self.onu_costs))
        if len(self.onu_rates) != len(self.onu_costs):
            raise ValueError("onu_rates and onu_costs must have the same length")
        if any(b <= a for a, b in zip(self.onu_rates, self.onu_rates[1:])):
            raise ValueError("onu_rates must be strictly ascending")

    def splitter_cost(self, t: int) -> float:
        return self.splitter_cost_base + t * self.splitter_cost_per_level

    def to_dict(self) -> dict:
        return {
            "c_df": self.c_df, "c_ff": self.c_ff, "c_tr": self.c_tr,
            "c_bp": self.c_bp, "c_rent": self.c_rent, "c_m": self.c_m,
            "c_p": self.c_p, "t_op": self.t_op,
            "onu_rates": list(self.onu_rates), "onu_costs": list(self.onu_costs),
            "splitter_cost_base": self.splitter_cost_base,
            "splitter_cost_per_level": self.splitter_cost_per_level,
            "p_cool": self.p_cool, "p_du": self.p_du,
            "p_ru": self.p_ru, "p_onu": self.p_onu,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CostCatalog":
        return cls(
            c_df=float(d["c_df"]), c_ff=float(d["c_ff"]), c_tr=float(d["c_tr"]),
            c_bp=float(d["c_bp"]), c_rent=float(d["c_rent"]), c_m=float(d["c_m"]),
            c_p=float(d["c_p"]), t_op=float(d["t_op"]),
            onu_rates=tuple(d["onu_rates"]), onu_costs=tuple(d["onu_costs"]),
            splitter_cost_base=float(d["splitter_cost_base"]),
            splitter_cost_per_level=float(d["splitter_cost_per_level"]),
            p_cool=float(d["p_cool"]), p_du=float(d["p_du"]),
            p_ru=float(d["p_ru"]), p_onu=float(d["p_onu"]),
        )


def onu_cost_for_demand(catalog: CostCatalog, demand: float) -> float:
    """Cost of the cheapest ONU whose rate covers ``demand`` (Gb/s).

    Raises UnsatisfiableDemandError if demand exceeds the largest rate.
    """
    if demand <= 0:
        raise ValueError(f"demand must be positive, got {demand}")
    for rate, cost in zip(catalog.onu_rates, catalog.onu_costs):
        if rate >= demand:
            return cost
    raise UnsatisfiableDemandError(
        f"demand {demand} Gb/s exceeds largest catalog rate {catalog.onu_rates[-1]}"
    )


@dataclass(frozen=True)
class PhysicalParams:
    """Optical and latency constants plus the discrete equipment ladders.

    ``splitter_types`` holds the admissible fan-out exponents t (a
    splitter of type t has 2^t ports and insertion loss
    ``t * split_loss_per_level`` dB). ``du_levels`` holds the DU
    capacity exponents k (a level-k DU serves up to 2^k RUs).
    """

    v_fiber: float                 # propagation speed in fiber, m/s
    l_fib: float                   # fiber attenuation, dB/km
    l_fix: float                   # fixed insertion losses, dB
    l_margin: float                # safety margin, dB
    l_budget: float                # optical power budget, dB
    split_loss_per_level: float    # dB per splitter level
    n_ru_max: int                  # max RUs per DU
    splitter_types: tuple[int, ...]
    du_levels: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.v_fiber <= 0:
            raise ValueError("v_fiber must be positive")
        object.__setattr__(self, "splitter_types", tuple(int(t) for t in self.splitter_types))
        object.__setattr__(self, "du_levels", tuple(int(k) for k in self.du_levels))
        ts = self.splitter_types
        if not ts or ts != tuple(range(1, len(ts) + 1)):
            raise ValueError(f"splitter_types must be a contiguous range 1..t_max, got {ts}")
        if any(2 ** k > self.n_ru_max for k in self.du_levels):
            raise ValueError("every DU level k must satisfy 2^k <= n_ru_max")

    @property
    def t_max(self) -> int:
        return self.splitter_types[-1]

    def splitter_loss(self, t: int) -> float:
        return t * self.split_loss_per_level

    def to_dict(self) -> dict:
        return {
            "v_fiber": self.v_fiber, "l_fib": self.l_fib, "l_fix": self.l_fix,
            "l_margin": self.l_margin, "l_budget": self.l_budget,
            "split_loss_per_level": self.split_loss_per_level,
            "n_ru_max": self.n_ru_max,
            "splitter_types": list(self.splitter_types),
            "du_levels": list(self.du_levels),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PhysicalParams":
        return cls(
            v_fiber=float(d["v_fiber"]), l_fib=float(d["l_fib"]),
            l_fix=float(d["l_fix"]), l_margin=float(d["l_margin"]),
            l_budget=float(d["l_budget"]),
            split_loss_per_level=float(d["split_loss_per_level"]),
            n_ru_max=int(d["n_ru_max"]),
            splitter_types=tuple(d["splitter_types"]),
            du_levels=tuple(d["du_levels"]),
        )


@dataclass(frozen=True)
class Scenario:
    """One benchmark deployment profile: demand, budgets, map geometry, sweeps."""

    name: str
    bw_per_ru: float          # Gb/s
    t_proc_us: float
    t_fh_us: float            # one-way fronthaul latency budget
    max_split_ratio: int      # power of two, caps the splitter fan-out
    map_side_m: float
    nd_sweep: tuple[int, ...]
    nr_sweep: tuple[int, ...]
    splitter_spacing_m: float

    def __post_init__(self) -> None:
        if self.t_proc_us >= self.t_fh_us:
            raise ValueError("t_proc_us must be strictly below t_fh_us")
        r = self.max_split_ratio
        if r < 2 or r > 64 or (r & (r - 1)) != 0:
            raise ValueError(f"max_split_ratio must be a power of two in [2, 64], got {r}")
        if self.map_side_m <= 0 or self.splitter_spacing_m <= 0:
            raise ValueError("map dimensions must be positive")
        object.__setattr__(self, "nd_sweep", tuple(int(n) for n in self.nd_sweep))
        object.__setattr__(self, "nr_sweep", tuple(int(n) for n in self.nr_sweep))
        if not self.nd_sweep or not self.nr_sweep:
            raise ValueError("sweep sets must be non-empty")

    def to_dict(self) -> dict:
        return {
            "name": self.name, "bw_per_ru": self.bw_per_ru,
            "t_proc_us": self.t_proc_us, "t_fh_us": self.t_fh_us,
            "max_split_ratio": self.max_split_ratio, "map_side_m": self.map_side_m,
            "nd_sweep": list(self.nd_sweep), "nr_sweep": list(self.nr_sweep),
            "splitter_spacing_m": self.splitter_spacing_m,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Scenario":
        return cls(
            name=str(d["name"]), bw_per_ru=float(d["bw_per_ru"]),
            t_proc_us=float(d["t_proc_us"]), t_fh_us=float(d["t_fh_us"]),
            max_split_ratio=int(d["max_split_ratio"]), map_side_m=float(d["map_side_m"]),
            nd_sweep=tuple(d["nd_sweep"]), nr_sweep=tuple(d["nr_sweep"]),
            splitter_spacing_m=float(d["splitter_spacing_m"]),
        )


def _euclidean_matrix(a: Sequence[Point2D], b: Sequence[Point2D]) -> np.ndarray:
    ax = np.array([[p.x, p.y] for p in a], dtype=np.float64).reshape(len(a), 2)
    bx = np.array([[p.x, p.y] for p in b], dtype=np.float64).reshape(len(b), 2)
    diff = ax[:, None, :] - bx[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """Immutable geometry of one problem instance.

    ``dist_ds[d, s]`` is the DU-site-to-splitter-site distance in meters,
    ``dist_sr[s, r]`` the splitter-site-to-RU distance. Matrices are
    stored (not recomputed on access) so serialized instances can be
    validated against their coordinates.
    """

    du_sites: tuple[Point2D, ...]
    splitter_sites: tuple[Point2D, ...]
    rus: tuple[RU, ...]
    dist_ds: np.ndarray
    dist_sr: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "du_sites", tuple(self.du_sites))
        object.__setattr__(self, "splitter_sites", tuple(self.splitter_sites))
        object.__setattr__(self, "rus", tuple(self.rus))
        dds = np.asarray(self.dist_ds, dtype=np.float64)
        dsr = np.asarray(self.dist_sr, dtype=np.float64)
        dds.setflags(write=False)
        dsr.setflags(write=False)
        object.__setattr__(self, "dist_ds", dds)
        object.__setattr__(self, "dist_sr", dsr)

    @classmethod
    def from_points(
        cls,
        du_sites: Sequence[Point2D],
        splitter_sites: Sequence[Point2D],
        rus: Sequence[RU],
        seed: int = 0,
    ) -> "NetworkInstance":
        """Build an instance, computing both distance matrices."""
        ru_pts = [r.position for r in rus]
        return cls(
            du_sites=tuple(du_sites),
            splitter_sites=tuple(splitter_sites),
            rus=tuple(rus),
            dist_ds=_euclidean_matrix(du_sites, splitter_sites),
            dist_sr=_euclidean_matrix(splitter_sites, ru_pts),
            seed=seed,
        )

    @property
    def n_dus(self) -> int:
        return len(self.du_sites)

    @property
    def n_splitters(self) -> int:
        return len(self.splitter_sites)

    @property
    def n_rus(self) -> int:
        return len(self.rus)

    @cached_property
    def du_xy(self) -> np.ndarray:
        arr = np.array([[p.x, p.y] for p in self.du_sites], dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def splitter_xy(self) -> np.ndarray:
        arr = np.array([[p.x, p.y] for p in self.splitter_sites], dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def ru_xy(self) -> np.ndarray:
        arr = np.array([[r.position.x, r.position.y] for r in self.rus], dtype=np.float64)
        arr.setflags(write=False)
        return arr

    def to_dict(self) -> dict:
        return {
            "du_sites": [p.to_dict() for p in self.du_sites],
            "splitter_sites": [p.to_dict() for p in self.splitter_sites],
            "rus": [r.to_dict() for r in self.rus],
            "dist_ds": self.dist_ds.tolist(),
            "dist_sr": self.dist_sr.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NetworkInstance":
        return cls(
            du_sites=tuple(Point2D.from_dict(p) for p in d["du_sites"]),
            splitter_sites=tuple(Point2D.from_dict(p) for p in d["splitter_sites"]),
            rus=tuple(RU.from_dict(r) for r in d["rus"]),
            dist_ds=np.asarray(d["dist_ds"], dtype=np.float64),
            dist_sr=np.asarray(d["dist_sr"], dtype=np.float64),
            seed=int(d["seed"]),
        )


def validate_instance(inst: NetworkInstance) -> list[str]:
    """Check NetworkInstance invariants; returns one message per violation.

    An empty list means the instance is well-formed. Violations are
    data, not errors: each message names the offending field and indices.
    """
    out: list[str] = []
    if not inst.du_sites:
        out.append("du_sites: empty")
    if not inst.splitter_sites:
        out.append("splitter_sites: empty")
    if not inst.rus:
        out.append("rus: empty")
    nd, ns, nr = len(inst.du_sites), len(inst.splitter_sites), len(inst.rus)
    if inst.dist_ds.shape != (nd, ns):
        out.append(f"dist_ds: shape {inst.dist_ds.shape} != ({nd}, {ns})")
    if inst.dist_sr.shape != (ns, nr):
        out.append(f"dist_sr: shape {inst.dist_sr.shape} != ({ns}, {nr})")
    if not (0 <= inst.seed < 2 ** 64):
        out.append(f"seed: {inst.seed} outside 64-bit unsigned range")
    if out:
        return out

    expected_ds = _euclidean_matrix(inst.du_sites, inst.splitter_sites)
    expected_sr = _euclidean_matrix(inst.splitter_sites, [r.position for r in inst.rus])
    for name, got, want in (("dist_ds", inst.dist_ds, expected_ds),
                            ("dist_sr", inst.dist_sr, expected_sr)):
        bad = ~np.isclose(got, want, rtol=1e-9, atol=1e-9)
        for i, j in zip(*np.nonzero(bad)):
            out.append(
                f"{name}[{i}][{j}]: stored {got[i, j]!r} != computed {want[i, j]!r}"
            )
    return out


def _normalize_counts(counts: Mapping[tuple[int, int, int], int]) -> dict[tuple[int, int, int], int]:
    out: dict[tuple[int, int, int], int] = {}
    for key, n in counts.items():
        d, s, t = (int(v) for v in key)
        n = int(n)
        if n < 0:
            raise ValueError(f"splitter count for {key} must be >= 0, got {n}")
        if n > 0:
            out[(d, s, t)] = n
    return out


@dataclass(frozen=True)
class Solution:
    """A full deployment decision for one instance.

    ``assignment[r]`` is the (du, splitter_site, splitter_type) path of
    RU r. ``splitter_counts`` maps (du, site, type) to the number of
    deployed splitter units (zero entries are dropped). ``feeder``
    holds the (du, site) corridors with a trenched feeder. ``du_level``
    carries the chosen capacity exponent per DU, None when unset.

    Construction validates shape only; constraint satisfaction is the
    business of the feasibility checker, so structurally sound but
    infeasible solutions are representable on purpose.
    """

    assignment: tuple[Assignment, ...]
    splitter_counts: Mapping[tuple[int, int, int], int]
    feeder: Mapping[tuple[int, int], bool]
    du_active: tuple[bool, ...]
    du_level: tuple[Optional[int], ...]

    def __post_init__(self) -> None:
        assignment = tuple((int(d), int(s), int(t)) for d, s, t in self.assignment)
        if any(min(a) < 0 for a in assignment):
            raise ValueError("assignment indices must be non-negative")
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "splitter_counts", _normalize_counts(self.splitter_counts))
        feeder = {(int(d), int(s)): True for (d, s), v in self.feeder.items() if v}
        object.__setattr__(self, "feeder", feeder)
        object.__setattr__(self, "du_active", tuple(bool(b) for b in self.du_active))
        object.__setattr__(
            self, "du_level",
            tuple(None if k is None else int(k) for k in self.du_level),
        )
        if len(self.du_level) != len(self.du_active):
            raise ValueError("du_level and du_active must have the same length")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Solution):
            return NotImplemented
        return (
            self.assignment == other.assignment
            and dict(self.splitter_counts) == dict(other.splitter_counts)
            and dict(self.feeder) == dict(other.feeder)
            and self.du_active == other.du_active
            and self.du_level == other.du_level
        )

    def du_loads(self) -> dict[int, int]:
        loads: dict[int, int] = {}
        for d, _, _ in self.assignment:
            loads[d] = loads.get(d, 0) + 1
        return loads

    def to_dict(self) -> dict:
        return {
            "assignment": [list(a) for a in self.assignment],
            "splitter_counts": [
                [d, s, t, n] for (d, s, t), n in sorted(self.splitter_counts.items())
            ],
            "feeder": [[d, s] for (d, s) in sorted(self.feeder)],
            "du_active": list(self.du_active),
            "du_level": list(self.du_level),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Solution":
        return cls(
            assignment=tuple(tuple(a) for a in d["assignment"]),
            splitter_counts={(c[0], c[1], c[2]): c[3] for c in d["splitter_counts"]},
            feeder={(f[0], f[1]): True for f in d["feeder"]},
            du_active=tuple(d["du_active"]),
            du_level=tuple(d["du_level"]),
        )


@dataclass(frozen=True)
class CostBreakdown:
    """The six additive cost components and their total, in dollars."""

    dist_fiber_trench: float
    feeder_trench_fiber: float
    equipment_capex: float
    maintenance_opex: float
    rent_opex: float
    energy_opex: float
    total: float

    COMPONENT_FIELDS = (
        "dist_fiber_trench", "feeder_trench_fiber", "equipment_capex",
        "maintenance_opex", "rent_opex", "energy_opex",
    )

    def __post_init__(self) -> None:
        s = sum(getattr(self, f) for f in self.COMPONENT_FIELDS)
        if not math.isclose(self.total, s, rel_tol=1e-6, abs_tol=1e-6):
            raise ValueError(f"total {self.total} != component sum {s}")

    @classmethod
    def from_components(cls, dist_fiber_trench: float, feeder_trench_fiber: float,
                        equipment_capex: float, maintenance_opex: float,
                        rent_opex: float, energy_opex: float) -> "CostBreakdown":
        comps = (dist_fiber_trench, feeder_trench_fiber, equipment_capex,
                 maintenance_opex, rent_opex, energy_opex)
        return cls(*comps, total=sum(comps))

    def components(self) -> dict[str, float]:
        return {f: getattr(self, f) for f in self.COMPONENT_FIELDS}

    def to_dict(self) -> dict:
        d = self.components()
        d["total"] = self.total
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CostBreakdown":
        return cls(
            dist_fiber_trench=float(d["dist_fiber_trench"]),
            feeder_trench_fiber=float(d["feeder_trench_fiber"]),
            equipment_capex=float(d["equipment_capex"]),
            maintenance_opex=float(d["maintenance_opex"]),
            rent_opex=float(d["rent_opex"]),
            energy_opex=float(d["energy_opex"]),
            total=float(d["total"]),
        )
