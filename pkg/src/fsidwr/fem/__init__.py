from .constraints import (ConstraintSet, build_constraints, distribute_local_to_global,
                          finalize_constrained_diagonal, scalar_constraints)
from .dofs import FIELDS, DofHandler, MixedSpace
from .elements import ScalarElement, element, lagrange_1d
from .geometry import CellGeometry, InvalidGeometryError
from .quadrature import Quadrature, face_points, gauss_line, gauss_square
from .values import COMP_IDX, N_JET, Basis, evaluate_field, face_basis, jets, locate, point_values

__all__ = [
    "Basis", "COMP_IDX", "CellGeometry", "ConstraintSet", "DofHandler", "FIELDS",
    "InvalidGeometryError", "MixedSpace", "N_JET", "Quadrature", "ScalarElement",
    "build_constraints", "distribute_local_to_global", "element", "evaluate_field",
    "face_basis", "face_points", "finalize_constrained_diagonal", "gauss_line",
    "gauss_square", "jets", "lagrange_1d", "locate", "point_values", "scalar_constraints",
]
