"""Shape functions and field jets on batches of cells.

A *jet* is the 15-vector of a mixed state at a point::

    0-1   v          2-5   grad v  (row-major, d v_i / d x_j)
    6-7   u          8-11  grad u
    12    p          13-14 grad p
"""
from __future__ import annotations

import numpy as np

from .geometry import CellGeometry, InvalidGeometryError, det2, face_normal_and_measure, inv2
from .quadrature import face_points

N_JET = 15
# component -> jet indices of (value, d/dx, d/dy)
COMP_IDX = np.array([[0, 2, 3], [1, 4, 5], [6, 8, 9], [7, 10, 11], [12, 13, 14]])
V, GRAD_V, U, GRAD_U, P, GRAD_P = (slice(0, 2), slice(2, 6), slice(6, 8),
                                   slice(8, 12), 12, slice(13, 15))


def geometry(space):
    geo = getattr(space, "_geometry", None)
    if geo is None:
        geo = space._geometry = CellGeometry(space.mesh, space.cells)
    return geo


class Basis:
    """Physical shape data of a mixed space on a chunk of cells.

    ``rows`` index the active-cell list of the space. ``ref`` is a ``(q, 2)``
    array of reference points; ``weights`` the matching quadrature weights.
    With ``face`` set, ``JxW`` carries the line measure and ``normal`` the
    outward unit normals.
    """

    def __init__(self, space, rows, ref, weights=None, face=None, geo=None):
        self.space = space
        self.rows = np.asarray(rows, dtype=int)
        geo = (geo or geometry(space)).subset(self.rows)
        self.x, jac = geo.map_points(ref)
        det = det2(jac)
        if face is None and np.any(det <= 0.0):
            raise InvalidGeometryError("non-positive cell Jacobian")
        jinv = inv2(jac)
        self.B = {}
        for h in {id(space.hv): space.hv, id(space.hp): space.hp}.values():
            fe = h.fe
            val = fe.values(ref)
            grd = fe.gradients(ref)
            dphys = np.einsum("eqji,qnj->eqni", jinv, grd)
            B = np.empty(dphys.shape[:2] + (3, fe.n_dofs))
            B[:, :, 0, :] = val
            B[:, :, 1, :] = dphys[..., 0]
            B[:, :, 2, :] = dphys[..., 1]
            self.B[h.degree] = B
        self.Bv = self.B[space.hv.degree]
        self.Bp = self.B[space.hp.degree]
        w = np.ones(len(ref)) if weights is None else np.asarray(weights)
        if face is None:
            self.JxW = det * w
            self.normal = None
        else:
            self.normal, ds = face_normal_and_measure(jac, face)
            self.JxW = ds * w

    def comp(self, c):
        return self.Bp if c == 4 else self.Bv

    @property
    def n_cells(self):
        return len(self.rows)


def face_basis(space, rows, face, quad_line):
    return Basis(space, rows, face_points(face, quad_line.points), quad_line.weights, face=face)


def jets(space, U, basis):
    """Jets of the state ``U`` at the points of ``basis``, shape ``(E, Q, 15)``."""
    loc = np.asarray(U)[space.cell_dofs[basis.rows]]
    E, Q = basis.JxW.shape
    out = np.empty((E, Q, N_JET))
    for c in range(5):
        out[..., COMP_IDX[c]] = np.einsum("eqan,en->eqa", basis.comp(c), loc[:, space.local_block(c)])
    return out


def evaluate_field(space, U, cell, ref_point, field):
    """Value and physical gradient of a field at one reference point of one cell.

    ``field`` is a component index (0..4) or one of ``'v'``, ``'u'``, ``'p'``.
    Returns ``(value, gradient)`` with shapes ``()``/``(2,)`` for scalars and
    ``(2,)``/``(2, 2)`` for vector fields.
    """
    row = space.hv.row_of(cell)
    b = Basis(space, [row], np.atleast_2d(ref_point))
    jet = jets(space, U, b)[0, 0]
    comps = {"v": (0, 1), "u": (2, 3), "p": (4,)}.get(field, (field,))
    val = jet[COMP_IDX[list(comps), 0]]
    grad = jet[COMP_IDX[list(comps), 1:]]
    if len(comps) == 1:
        return val[0], grad[0]
    return val, grad


def locate(space, point, tol=1e-10):
    """Find ``(cell id, reference point)`` containing a physical point."""
    geo = geometry(space)
    point = np.asarray(point, dtype=float)
    lo = geo.corners.min(axis=1)
    hi = geo.corners.max(axis=1)
    pad = 0.5 * (hi - lo).max(axis=1, keepdims=True) * geo.curved.any(axis=1, keepdims=True) + 1e-12
    cand = np.flatnonzero(np.all((point >= lo - pad) & (point <= hi + pad), axis=1))
    for r in cand:
        g = geo.subset([r])
        ref = np.array([0.5, 0.5])
        for _ in range(50):
            x, jac = g.map_points(ref[None, :])
            res = x[0, 0] - point
            step = np.linalg.solve(jac[0, 0], res)
            damp = 1.0
            while np.abs(step * damp).max() > 1.0:
                damp *= 0.5
            ref = ref - damp * step
            if np.abs(step).max() < 1e-13:
                break
        if np.all(ref >= -tol) and np.all(ref <= 1 + tol):
            x, _ = g.map_points(ref[None, :])
            if np.linalg.norm(x[0, 0] - point) < 1e-10 * max(1.0, np.linalg.norm(point)):
                return int(space.cells[r]), np.clip(ref, 0.0, 1.0)
    raise ValueError(f"point {tuple(point)} is outside the mesh")


def point_values(space, U, point, field):
    cell, ref = locate(space, point)
    return evaluate_field(space, U, cell, ref, field)[0]
