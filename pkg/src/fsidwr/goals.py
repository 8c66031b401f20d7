"""Quantities of interest: boundary forces and point values."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import physics
from .fem import face_basis, face_points, gauss_line, jets, point_values
from .fem.values import Basis
from .kernels import local_vectors
from .linalg import scatter_vector
from .mesh import FLUID, interface_faces


@dataclass(frozen=True)
class GoalSpec:
    """Force on the boundary parts ``ids`` (plus the interface if asked) in ``direction``.

    The integrand is the ALE fluid traction on the obstacle, i.e. the stress
    applied with the fluid's outward normal and the sign flipped so that a
    flow in +x yields a positive drag. ``scale`` turns the force into a
    coefficient.
    """

    ids: tuple = (80, 81)
    include_interface: bool = True
    direction: tuple = (1.0, 0.0)
    scale: float = 1.0
    name: str = "drag"


def goal_faces(mesh, spec):
    """``{local face: [cells]}`` of fluid-side faces over which the force is integrated."""
    out = {}
    for c, f, _ in mesh.boundary_faces(spec.ids):
        if mesh.cell_material[c] == FLUID:
            out.setdefault(f, []).append(c)
    if spec.include_interface:
        for c, f in interface_faces(mesh):
            out.setdefault(f, []).append(c)
    return out


def _face_data(space, cells, face, nq, state_space, U):
    rows = np.array([space.hv.row_of(c) for c in cells])
    ql = gauss_line(nq)
    b = face_basis(space, rows, face, ql)
    if state_space is None or state_space is space:
        jet = jets(space, U, b)
    else:
        sb = Basis(state_space, rows, face_points(face, ql.points), ql.weights, face=face)
        jet = jets(state_space, U, sb)
    return rows, b, jet


def _nq(space):
    return space.degrees[0] + 2


def evaluate_goal(space, U, params, spec):
    """Value of the force functional for the state ``U``."""
    total = 0.0
    d = np.asarray(spec.direction, dtype=float)
    for face, cells in goal_faces(space.mesh, spec).items():
        _, b, jet = _face_data(space, cells, face, _nq(space), None, U)
        t = physics.traction(jet, b.normal, params)
        total += float(np.sum(b.JxW * (t @ d)))
    return -spec.scale * total


def goal_derivative(space, U, params, spec, state_space=None):
    """Gradient of the functional w.r.t. the DoFs of ``space``.

    ``U`` lives in ``state_space`` (default: ``space``); the derivative is
    taken at that state and tested with the basis of ``space``.
    """
    n = space.n_dofs
    out = np.zeros(n)
    nq = _nq(space)
    for face, cells in goal_faces(space.mesh, spec).items():
        rows, b, jet = _face_data(space, cells, face, nq, state_space, U)
        g = physics.traction_derivative(jet, b.normal, params, spec.direction)
        out += scatter_vector(local_vectors(b.Bv, b.Bp, b.JxW, -spec.scale * g), space.cell_dofs[rows], n)
    return out


def displacement_at(space, U, point):
    return point_values(space, U, point, "u")


def pressure_at(space, U, point):
    return float(point_values(space, U, point, "p"))


def format_value(x):
    """16 significant digits in scientific notation."""
    return f"{x:.15e}"
