"""Adaptive finite elements for stationary monolithic ALE fluid-structure interaction.

Q2/Q2/Q1 velocity/displacement/pressure on quadrilateral meshes with hanging
nodes, Newton's method with a sparse direct solver, and goal-oriented error
control of boundary forces by a partition-of-unity dual-weighted residual.
"""
from .driver import LoopRecord, RunConfig, read_results_table, run_adaptive, write_results_table
from .dwr import ErrorEstimate, PartitionOfUnity, adjoint_problem, compute_indicators, mark_cells, solve_adjoint
from .fsi_model import FsiParameters, FsiProblem, InvalidStateError, NewtonError, newton_solve, solve
from .goals import GoalSpec, evaluate_goal, goal_derivative
from .linalg import SolverError, direct_solve, transpose_solve
from .mesh import FLUID, SOLID, BoundaryIds, Mesh, read_ucd, refine, refine_global, write_ucd
from .meshgen import flow2d1_mesh, fsi1_mesh

__version__ = "0.1.0"

__all__ = [
    "BoundaryIds", "ErrorEstimate", "FLUID", "FsiParameters", "FsiProblem", "GoalSpec",
    "InvalidStateError", "LoopRecord", "Mesh", "NewtonError", "PartitionOfUnity", "RunConfig",
    "SOLID", "SolverError", "adjoint_problem", "compute_indicators", "direct_solve",
    "evaluate_goal", "flow2d1_mesh", "fsi1_mesh", "goal_derivative", "mark_cells",
    "newton_solve", "read_results_table", "read_ucd", "refine", "refine_global", "run_adaptive",
    "solve", "solve_adjoint", "transpose_solve", "write_results_table", "write_ucd",
]
