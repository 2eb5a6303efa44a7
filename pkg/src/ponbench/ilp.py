"""Exact side of the toolkit: integer model export/import and a small-scale oracle.

The model mirrors the shared evaluator exactly: its objective evaluates
to the same dollars as ``compute_tco`` on any variable assignment, and
its rows encode the same constraint families as ``check_solution``.
Path-level latency/loss constraints are presolved: every (d, s, r, t)
combination that cannot carry traffic has its assignment variable fixed
to zero instead of emitting a row per combination.

No solver is embedded. The model is exported as LP-format text for any
external solver; solutions come back as plain ``name value`` lines.
Desk-scale exactness is provided by ``brute_force_optimal``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .costing import (
    compute_tco,
    max_feasible_type,
    min_du_level,
    path_latency_us,
    path_loss_db,
    unit_cap,
)
from .types import (
    CostBreakdown,
    CostCatalog,
    NetworkInstance,
    PhysicalParams,
    Scenario,
    Solution,
    onu_cost_for_demand,
)

__all__ = [
    "IntegralityError",
    "MilpModel",
    "ModelSizeError",
    "OracleLimits",
    "OracleSizeError",
    "SolutionParseError",
    "brute_force_optimal",
    "build_model",
    "constraint_family_satisfaction",
    "export_lp",
    "import_solution",
    "objective_value",
    "solution_to_values",
]

_M_PER_KM = 1000.0


class ModelSizeError(ValueError):
    """Instance would exceed the declared variable budget."""


class OracleSizeError(ValueError):
    """Instance exceeds the brute-force size caps."""


class SolutionParseError(ValueError):
    """Solver output is malformed or references unknown variables."""


class IntegralityError(ValueError):
    """Solver output value is fractional beyond tolerance."""


def f_name(d: int, s: int, r: int, t: int) -> str:
    return f"f_{d}_{s}_{r}_{t}"


def n_name(d: int, s: int, t: int) -> str:
    return f"n_{d}_{s}_{t}"


def z_name(d: int, s: int) -> str:
    return f"z_{d}_{s}"


def u_name(d: int) -> str:
    return f"u_{d}"


def y_name(d: int, k: int) -> str:
    return f"y_{d}_{k}"


@dataclass(frozen=True)
class LinearRow:
    name: str
    coeffs: tuple[tuple[str, float], ...]
    sense: str  # "<=" or "="
    rhs: float

    def value(self, values: Mapping[str, float]) -> float:
        return sum(c * values[v] for v, c in self.coeffs)

    def satisfied(self, values: Mapping[str, float], tol: float = 1e-9) -> bool:
        lhs = self.value(values)
        slack = tol * max(1.0, abs(self.rhs))
        if self.sense == "<=":
            return lhs <= self.rhs + slack
        return abs(lhs - self.rhs) <= slack


@dataclass(frozen=True)
class MilpModel:
    n_dus: int
    n_splitters: int
    n_rus: int
    splitter_types: tuple[int, ...]
    du_levels: tuple[int, ...]
    binaries: tuple[str, ...]
    generals: tuple[str, ...]
    objective: tuple[tuple[str, float], ...]
    objective_constant: float
    rows: tuple[LinearRow, ...]
    fixed_zero: tuple[str, ...]
    fixed_latency: frozenset[str]
    fixed_loss: frozenset[str]
    big_m: int

    @property
    def variable_count(self) -> int:
        return len(self.binaries) + len(self.generals)

    def variable_types(self) -> dict[str, str]:
        out = {v: "binary" for v in self.binaries}
        out.update({v: "integer" for v in self.generals})
        return out


def build_model(inst: NetworkInstance, params: PhysicalParams, catalog: CostCatalog,
                scenario: Scenario, max_variables: int = 2_000_000) -> MilpModel:
    """Assemble the full deployment model over one instance.

    Raises ModelSizeError (with the offending counts) when the variable
    tensor would exceed ``max_variables``.
    """
    nd, ns, nr = inst.n_dus, inst.n_splitters, inst.n_rus
    types = params.splitter_types
    levels = params.du_levels
    nt, nk = len(types), len(levels)
    total_vars = nd * ns * nr * nt + nd * ns * nt + nd * ns + nd + nd * nk
    if total_vars > max_variables:
        raise ModelSizeError(
            f"{total_vars} variables (D={nd}, S={ns}, R={nr}, T={nt}, K={nk}) "
            f"exceed the budget of {max_variables}"
        )

    big_m = unit_cap(inst, params)

    binaries: list[str] = []
    generals: list[str] = []
    objective: list[tuple[str, float]] = []

    dist_sr_km = inst.dist_sr / _M_PER_KM
    dist_ds_km = inst.dist_ds / _M_PER_KM

    fixed_latency: set[str] = set()
    fixed_loss: set[str] = set()
    for d in range(nd):
        for s in range(ns):
            for r in range(nr):
                lat_ok = path_latency_us(inst, params, d, s, r) <= scenario.t_fh_us
                for t in types:
                    name = f_name(d, s, r, t)
                    binaries.append(name)
                    objective.append(
                        (name, (catalog.c_df + catalog.c_tr) * float(dist_sr_km[s, r]))
                    )
                    if not lat_ok:
                        fixed_latency.add(name)
                    if path_loss_db(inst, params, d, s, r, t) > params.l_budget:
                        fixed_loss.add(name)

    for d in range(nd):
        for s in range(ns):
            for t in types:
                name = n_name(d, s, t)
                generals.append(name)
                objective.append((
                    name,
                    float(dist_ds_km[d, s]) * catalog.c_ff
                    + catalog.splitter_cost(t) * (1.0 + catalog.t_op * catalog.c_m),
                ))

    for d in range(nd):
        for s in range(ns):
            name = z_name(d, s)
            binaries.append(name)
            objective.append((name, float(dist_ds_km[d, s]) * catalog.c_tr))

    for d in range(nd):
        name = u_name(d)
        binaries.append(name)
        objective.append((
            name,
            catalog.c_bp * (1.0 + catalog.t_op * catalog.c_m)
            + catalog.t_op * catalog.c_rent
            + catalog.t_op * catalog.c_p * catalog.p_cool,
        ))

    for d in range(nd):
        for k in levels:
            name = y_name(d, k)
            binaries.append(name)
            objective.append((name, catalog.t_op * catalog.c_p * 2 ** k * catalog.p_du))

    constant = sum(
        onu_cost_for_demand(catalog, ru.demand_gbps) for ru in inst.rus
    ) * (1.0 + catalog.t_op * catalog.c_m)
    constant += catalog.t_op * catalog.c_p * nr * (catalog.p_onu + catalog.p_ru)

    rows: list[LinearRow] = []
    for r in range(nr):
        coeffs = tuple(
            (f_name(d, s, r, t), 1.0)
            for d in range(nd) for s in range(ns) for t in types
        )
        rows.append(LinearRow(f"assign_r{r}", coeffs, "=", 1.0))
    for d in range(nd):
        for s in range(ns):
            for t in types:
                coeffs = tuple((f_name(d, s, r, t), 1.0) for r in range(nr))
                coeffs += ((n_name(d, s, t), -float(2 ** t)),)
                rows.append(LinearRow(f"ports_d{d}_s{s}_t{t}", coeffs, "<=", 0.0))
    for d in range(nd):
        for s in range(ns):
            coeffs = tuple((n_name(d, s, t), 1.0) for t in types)
            coeffs += ((z_name(d, s), -float(big_m)),)
            rows.append(LinearRow(f"feeder_d{d}_s{s}", coeffs, "<=", 0.0))
    for d in range(nd):
        for s in range(ns):
            rows.append(LinearRow(
                f"link_d{d}_s{s}", ((z_name(d, s), 1.0), (u_name(d), -1.0)), "<=", 0.0,
            ))
    for d in range(nd):
        coeffs = tuple((y_name(d, k), 1.0) for k in levels)
        coeffs += ((u_name(d), -1.0),)
        rows.append(LinearRow(f"level_d{d}", coeffs, "=", 0.0))
    for d in range(nd):
        coeffs = tuple(
            (f_name(d, s, r, t), 1.0)
            for s in range(ns) for t in types for r in range(nr)
        )
        coeffs += tuple((y_name(d, k), -float(2 ** k)) for k in levels)
        rows.append(LinearRow(f"load_d{d}", coeffs, "<=", 0.0))
    for d in range(nd):
        coeffs = tuple((y_name(d, k), float(2 ** k)) for k in levels)
        rows.append(LinearRow(f"cap_d{d}", coeffs, "<=", float(params.n_ru_max)))

    fixed = tuple(v for v in binaries if v in fixed_latency or v in fixed_loss)
    return MilpModel(
        n_dus=nd, n_splitters=ns, n_rus=nr,
        splitter_types=types, du_levels=levels,
        binaries=tuple(binaries), generals=tuple(generals),
        objective=tuple(objective), objective_constant=constant,
        rows=tuple(rows), fixed_zero=fixed,
        fixed_latency=frozenset(fixed_latency), fixed_loss=frozenset(fixed_loss),
        big_m=big_m,
    )


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return format(x, ".15g")


def _format_terms(coeffs: Sequence[tuple[str, float]], constant: float = 0.0) -> list[str]:
    """Render a linear expression as tokens like '+ 2000 f_0_0_0_1'."""
    tokens: list[str] = []
    for name, coeff in coeffs:
        if coeff == 0.0:
            continue
        sign = "+" if coeff >= 0 else "-"
        tokens.append(f"{sign} {_num(abs(coeff))} {name}")
    if constant != 0.0:
        sign = "+" if constant >= 0 else "-"
        tokens.append(f"{sign} {_num(abs(constant))}")
    if not tokens:
        tokens.append("+ 0")
    return tokens


def _wrap(tokens: list[str], head: str, per_line: int = 6) -> list[str]:
    lines = []
    first = tokens[0][2:] if tokens[0].startswith("+ ") else tokens[0]
    buf = [head + first]
    for tok in tokens[1:]:
        if len(buf) > per_line:
            lines.append(" ".join(buf))
            buf = [" " + tok]
        else:
            buf.append(tok)
    lines.append(" ".join(buf))
    return lines


def export_lp(model: MilpModel) -> str:
    """Deterministic LP-format text for the model.

    Sections: objective, constraint rows in declaration order, bounds
    carrying the presolved variable fixings, then integrality
    declarations. Re-exporting the same model yields identical text.
    """
    lines: list[str] = ["Minimize"]
    lines.extend(_wrap(_format_terms(model.objective, model.objective_constant), " obj: "))
    lines.append("Subject To")
    for row in model.rows:
        tokens = _format_terms(row.coeffs)
        tokens.append(("=" if row.sense == "=" else "<=") + " " + _num(row.rhs))
        lines.extend(_wrap(tokens, f" {row.name}: "))
    lines.append("Bounds")
    for name in model.fixed_zero:
        lines.append(f" {name} = 0")
    lines.append("Binary")
    for name in model.binaries:
        lines.append(f" {name}")
    lines.append("General")
    for name in model.generals:
        lines.append(f" {name}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def solution_to_values(model: MilpModel, sol: Solution) -> dict[str, float]:
    """Variable assignment induced by a Solution (every variable present)."""
    values = {name: 0.0 for name in model.binaries}
    values.update({name: 0.0 for name in model.generals})
    for r, (d, s, t) in enumerate(sol.assignment):
        values[f_name(d, s, r, t)] = 1.0
    for (d, s, t), n in sol.splitter_counts.items():
        values[n_name(d, s, t)] = float(n)
    for (d, s) in sol.feeder:
        values[z_name(d, s)] = 1.0
    for d, active in enumerate(sol.du_active):
        values[u_name(d)] = 1.0 if active else 0.0
    for d, k in enumerate(sol.du_level):
        if k is not None:
            values[y_name(d, k)] = 1.0
    return values


def objective_value(model: MilpModel, values: Mapping[str, float]) -> float:
    return sum(c * values[v] for v, c in model.objective) + model.objective_constant


def constraint_family_satisfaction(model: MilpModel, values: Mapping[str, float]) -> dict[str, bool]:
    """Per constraint family, whether every row (or fixing) is satisfied.

    Families mirror the feasibility checker's identifiers; the
    presolved latency/loss fixings count as violated when a fixed
    assignment variable carries value 1.
    """
    prefix_to_family = {
        "assign": "assignment_unique",
        "ports": "splitter_ports",
        "feeder": "feeder_link",
        "link": "feeder_active_du",
        "level": "level_selection",
        "load": "du_capacity",
        "cap": "du_level_cap",
    }
    out = {family: True for family in prefix_to_family.values()}
    for row in model.rows:
        family = prefix_to_family[row.name.split("_")[0]]
        if not row.satisfied(values):
            out[family] = False
    out["latency_budget"] = all(values[v] < 0.5 for v in model.fixed_latency)
    out["loss_budget"] = all(values[v] < 0.5 for v in model.fixed_loss)
    return out


def import_solution(model: MilpModel, solver_output: str) -> Solution:
    """Rebuild a Solution from ``name value`` solver output.

    Variables omitted from the output default to zero. Unknown names
    raise SolutionParseError; binaries (and unit counts) further than
    1e-6 from an integer raise IntegralityError.
    """
    var_types = model.variable_types()
    values: dict[str, float] = {}
    for lineno, raw in enumerate(solver_output.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionParseError(f"line {lineno}: expected 'name value', got {raw!r}")
        name, text = parts
        if name not in var_types:
            raise SolutionParseError(f"line {lineno}: unknown variable {name!r}")
        try:
            value = float(text)
        except ValueError as exc:
            raise SolutionParseError(f"line {lineno}: bad value {text!r}") from exc
        values[name] = value

    def as_int(name: str, value: float) -> int:
        nearest = round(value)
        if abs(value - nearest) > 1e-6:
            raise IntegralityError(f"{name} = {value} is fractional beyond 1e-6")
        return int(nearest)

    def as_bit(name: str, value: float) -> int:
        bit = as_int(name, value)
        if bit not in (0, 1):
            raise IntegralityError(f"{name} = {value} is not a 0/1 value")
        return bit

    assignments: dict[int, list[tuple[int, int, int]]] = {r: [] for r in range(model.n_rus)}
    counts: dict[tuple[int, int, int], int] = {}
    feeder: dict[tuple[int, int], bool] = {}
    du_active = [False] * model.n_dus
    du_level: list[Optional[int]] = [None] * model.n_dus

    for name, value in values.items():
        kind = name.split("_", 1)[0]
        if kind == "f":
            _, d, s, r, t = name.split("_")
            if as_bit(name, value):
                assignments[int(r)].append((int(d), int(s), int(t)))
        elif kind == "n":
            _, d, s, t = name.split("_")
            count = as_int(name, value)
            if count < 0:
                raise SolutionParseError(f"{name} = {value} is negative")
            if count > 0:
                counts[(int(d), int(s), int(t))] = count
        elif kind == "z":
            _, d, s = name.split("_")
            if as_bit(name, value):
                feeder[(int(d), int(s))] = True
        elif kind == "u":
            _, d = name.split("_")
            du_active[int(d)] = bool(as_bit(name, value))
        elif kind == "y":
            _, d, k = name.split("_")
            if as_bit(name, value):
                d_i, k_i = int(d), int(k)
                if du_level[d_i] is not None:
                    raise SolutionParseError(f"DU {d_i} selects more than one level")
                du_level[d_i] = k_i

    assignment: list[tuple[int, int, int]] = []
    for r in range(model.n_rus):
        chosen = assignments[r]
        if len(chosen) != 1:
            raise SolutionParseError(f"RU {r} has {len(chosen)} assignments, expected 1")
        assignment.append(chosen[0])

    return Solution(
        assignment=tuple(assignment),
        splitter_counts=counts,
        feeder=feeder,
        du_active=tuple(du_active),
        du_level=tuple(du_level),
    )


# --- exhaustive oracle -------------------------------------------------------

@dataclass(frozen=True)
class OracleLimits:
    max_dus: int = 3
    max_splitters: int = 6
    max_rus: int = 6


def _compositions(total: int, bins: int) -> Iterable[tuple[int, ...]]:
    if bins == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, bins - 1):
            yield (head,) + tail


def _bits(mask: int) -> Iterable[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def brute_force_optimal(
    inst: NetworkInstance,
    params: PhysicalParams,
    catalog: CostCatalog,
    scenario: Scenario,
    limits: OracleLimits | None = None,
) -> Optional[tuple[Solution, CostBreakdown]]:
    """Globally optimal solution of a tiny instance, or None if infeasible.

    Exhausts every way of splitting the RUs across DUs, splitter sites
    and splitter-type allocations (with exact dimensioning: minimal unit
    counts per group and the minimal capacity level per DU), organised
    as a subset DP so the full search fits the size caps comfortably.
    Deterministic: ties resolve toward the earliest candidate in a fixed
    enumeration order.
    """
    limits = limits or OracleLimits()
    nd, ns, nr = inst.n_dus, inst.n_splitters, inst.n_rus
    if nd > limits.max_dus or ns > limits.max_splitters or nr > limits.max_rus:
        raise OracleSizeError(
            f"instance (D={nd}, S={ns}, R={nr}) exceeds oracle caps "
            f"(D<={limits.max_dus}, S<={limits.max_splitters}, R<={limits.max_rus})"
        )

    types = params.splitter_types
    nt = len(types)
    maint = 1.0 + catalog.t_op * catalog.c_m

    tmax = [[[max_feasible_type(inst, params, scenario, d, s, r) for r in range(nr)]
             for s in range(ns)] for d in range(nd)]

    # Per group size: admissible type allocations, their unit requirements
    # and cumulative counts for the feasibility (matching) test.
    comps: dict[int, list[tuple[int, ...]]] = {}
    comp_units: dict[int, np.ndarray] = {}
    comp_suffix: dict[int, np.ndarray] = {}
    for size in range(1, nr + 1):
        cs = list(_compositions(size, nt))
        comps[size] = cs
        comp_units[size] = np.array(
            [[math.ceil(m / 2 ** t) if m else 0 for m, t in zip(c, types)] for c in cs],
            dtype=np.float64,
        )
        comp_suffix[size] = np.array(
            [[sum(c[i] for i, tt in enumerate(types) if tt >= t) for t in types] for c in cs],
            dtype=np.int64,
        )

    dist_sr_cost = (catalog.c_df + catalog.c_tr) * inst.dist_sr / _M_PER_KM

    INF = math.inf
    full = (1 << nr) - 1

    # Cheapest way to serve RU set B through corridor (d, s), with the
    # winning site and type allocation remembered for reconstruction.
    group_cost: list[list[list[float]]] = [[[INF] * (1 << nr) for _ in range(ns)] for _ in range(nd)]
    group_comp: list[list[list[int]]] = [[[-1] * (1 << nr) for _ in range(ns)] for _ in range(nd)]
    for d in range(nd):
        for s in range(ns):
            unit_w = np.array(
                [float(inst.dist_ds[d, s]) / _M_PER_KM * catalog.c_ff
                 + catalog.splitter_cost(t) * maint for t in types]
            )
            trench = float(inst.dist_ds[d, s]) / _M_PER_KM * catalog.c_tr
            tm = tmax[d][s]
            for mask in range(1, 1 << nr):
                members = list(_bits(mask))
                member_tmax = [tm[r] for r in members]
                if any(t is None for t in member_tmax):
                    continue
                size = len(members)
                counts_ge = np.array(
                    [sum(1 for x in member_tmax if x >= t) for t in types], dtype=np.int64
                )
                feasible = (comp_suffix[size] <= counts_ge).all(axis=1)
                if not feasible.any():
                    continue
                costs = comp_units[size] @ unit_w
                costs = np.where(feasible, costs, INF)
                idx = int(np.argmin(costs))
                base = trench + sum(float(dist_sr_cost[s, r]) for r in members)
                group_cost[d][s][mask] = base + float(costs[idx])
                group_comp[d][s][mask] = idx

    # Cheapest service of RU set A entirely through DU d, partitioning A
    # into per-site groups (the block containing A's lowest RU anchors
    # the recursion, so each partition is enumerated once).
    serve_cost = [[INF] * (1 << nr) for _ in range(nd)]
    serve_choice: list[list[Optional[tuple[int, int]]]] = [
        [None] * (1 << nr) for _ in range(nd)
    ]
    for d in range(nd):
        serve_cost[d][0] = 0.0
        for mask in range(1, 1 << nr):
            low = mask & -mask
            best = INF
            best_choice = None
            sub = mask
            while sub:
                if sub & low:
                    rest = serve_cost[d][mask ^ sub]
                    if rest < INF:
                        for s in range(ns):
                            c = group_cost[d][s][sub]
                            if c < INF and c + rest < best:
                                best = c + rest
                                best_choice = (s, sub)
                sub = (sub - 1) & mask
            serve_cost[d][mask] = best
            serve_choice[d][mask] = best_choice

    def du_site_cost(load: int) -> float:
        level = min_du_level(load, params)
        if level is None:
            return INF
        return (
            catalog.c_bp * maint
            + catalog.t_op * catalog.c_rent
            + catalog.t_op * catalog.c_p * (catalog.p_cool + 2 ** level * catalog.p_du)
        )

    best_total = INF
    best_map: Optional[tuple[int, ...]] = None
    for du_map in itertools.product(range(nd), repeat=nr):
        masks = [0] * nd
        for r, d in enumerate(du_map):
            masks[d] |= 1 << r
        total = 0.0
        for d in range(nd):
            if not masks[d]:
                continue
            c = serve_cost[d][masks[d]]
            if c >= INF:
                total = INF
                break
            site = du_site_cost(bin(masks[d]).count("1"))
            if site >= INF:
                total = INF
                break
            total += c + site
        if total < best_total:
            best_total = total
            best_map = du_map

    if best_map is None or best_total >= INF:
        return None

    # Reconstruct the winning structure.
    assignment: list[Optional[tuple[int, int, int]]] = [None] * nr
    counts: dict[tuple[int, int, int], int] = {}
    feeder: dict[tuple[int, int], bool] = {}
    du_active = [False] * nd
    du_level: list[Optional[int]] = [None] * nd
    masks = [0] * nd
    for r, d in enumerate(best_map):
        masks[d] |= 1 << r
    for d in range(nd):
        mask = masks[d]
        if not mask:
            continue
        du_active[d] = True
        du_level[d] = min_du_level(bin(mask).count("1"), params)
        while mask:
            choice = serve_choice[d][mask]
            assert choice is not None
            s, block = choice
            feeder[(d, s)] = True
            members = list(_bits(block))
            comp = comps[len(members)][group_comp[d][s][block]]
            slots: list[int] = []
            for i in range(nt - 1, -1, -1):
                slots.extend([types[i]] * comp[i])
            members_sorted = sorted(members, key=lambda r: (-(tmax[d][s][r] or 0), r))
            for r, t in zip(members_sorted, slots):
                assignment[r] = (d, s, t)
            for t, m in zip(types, comp):
                if m:
                    key = (d, s, t)
                    counts[key] = counts.get(key, 0) + math.ceil(m / 2 ** t)
            mask ^= block

    sol = Solution(
        assignment=tuple(a for a in assignment if a is not None),
        splitter_counts=counts,
        feeder=feeder,
        du_active=tuple(du_active),
        du_level=tuple(du_level),
    )
    if len(sol.assignment) != nr:
        raise RuntimeError("oracle reconstruction lost an RU assignment")
    return sol, compute_tco(inst, params, catalog, sol)
