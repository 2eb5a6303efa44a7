"""Heuristic solvers sharing one outcome/trace contract."""
from .common import Deadline, SolverOutcome, write_trace_csv
from .ga import GaConfig, decode_and_score, evolve, repair
from .kmc import KmcConfig, initial_cluster_counts, kmeans, solve_kmc
from .rssa import RssaConfig, incremental_proxy, run_once, solve_rssa

__all__ = [
    "Deadline",
    "GaConfig",
    "KmcConfig",
    "RssaConfig",
    "SolverOutcome",
    "decode_and_score",
    "evolve",
    "incremental_proxy",
    "initial_cluster_counts",
    "kmeans",
    "repair",
    "run_once",
    "solve_kmc",
    "solve_rssa",
    "write_trace_csv",
]
