"""Desk-scale constraint integer programming.

Expression DAGs with interval arithmetic, an extended-formulation relaxation,
a dense bounded simplex, spatial branch-and-bound, symmetry handling,
decomposition heuristics and a presolve engine with dual postsolve.
"""

from .io import ParseError, read_instance, write_instance, write_solution
from .kernels import BACKEND
from .model import Instance
from .presolve import postsolve_dual, postsolve_primal, run_presolve
from .report import aggregate_runs, shifted_geometric_mean
from .sbb import SolveParams, SolveResult, check_original_feasibility, solve

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Instance",
    "ParseError",
    "SolveParams",
    "SolveResult",
    "aggregate_runs",
    "check_original_feasibility",
    "postsolve_dual",
    "postsolve_primal",
    "read_instance",
    "run_presolve",
    "shifted_geometric_mean",
    "solve",
    "write_instance",
    "write_solution",
]
