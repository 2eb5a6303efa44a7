"""Shared solver plumbing: wall-clock deadlines, outcome record, trace IO."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from ..types import CostBreakdown, Solution

__all__ = ["Deadline", "SolverOutcome", "write_trace_csv"]


class Deadline:
    """Monotonic wall-clock budget; solvers poll it inside their loops."""

    def __init__(self, budget_s: float):
        self.budget_s = budget_s
        self.t0 = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def expired(self) -> bool:
        return self.elapsed() >= self.budget_s


@dataclass
class SolverOutcome:
    """Uniform solver result: a solution when one was found, a marker otherwise.

    ``feasible`` is True only when the returned solution passed the
    canonical feasibility checker. ``best_cost`` is the exact TCO for
    feasible results; ``best_objective`` carries the solver's internal
    objective (useful when only an infeasible best exists).
    ``failure`` holds the solver-specific attribution for markers.
    """

    feasible: bool
    solution: Optional[Solution]
    breakdown: Optional[CostBreakdown]
    best_cost: Optional[float]
    iterations: int
    elapsed_s: float
    best_objective: Optional[float] = None
    failure: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "solution": self.solution.to_dict() if self.solution else None,
            "breakdown": self.breakdown.to_dict() if self.breakdown else None,
            "best_cost": self.best_cost,
            "iterations": self.iterations,
            "elapsed_s": self.elapsed_s,
            "best_objective": self.best_objective,
            "failure": self.failure,
        }


def write_trace_csv(rows: Sequence[dict], path: str | Path, fieldnames: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
