"""Degree-of-freedom numbering for scalar and mixed Lagrange spaces."""
from __future__ import annotations

import numpy as np

from ..mesh import FACE_VERTICES
from .elements import element, lagrange_1d
from .geometry import CellGeometry

FIELDS = {"v": (0, 1), "u": (2, 3), "p": (4,)}


class DofHandler:
    """Global numbering of a continuous scalar Q_k space on the active cells.

    DoFs live on mesh entities: one per used vertex, ``k-1`` per used edge
    (stored in the edge's own vertex order) and ``(k-1)^2`` per active cell.
    Faces with a hanging vertex produce constraint lines mapping the fine-side
    DoFs onto the coarse face's DoFs.
    """

    def __init__(self, mesh, degree):
        self.mesh = mesh
        self.degree = k = degree
        self.fe = fe = element(degree)
        self.cells = np.asarray(mesh.active_cells, dtype=int)
        users = mesh._edge_users()
        vertices = mesh.used_vertices()
        edges = sorted(users)
        self.vertex_dof = {v: i for i, v in enumerate(vertices)}
        n = len(vertices)
        m = k - 1
        self.edge_dof = {}
        for e in edges:
            self.edge_dof[e] = np.arange(n, n + m)
            n += m
        mi = m * m
        cell_dofs = np.empty((len(self.cells), fe.n_dofs), dtype=np.int64)
        for r, c in enumerate(self.cells):
            verts = mesh.cell_vertices[c]
            cell_dofs[r, :4] = [self.vertex_dof[v] for v in verts]
            for f, e in enumerate(mesh.cell_edges[c]):
                d = self.edge_dof[e]
                if mesh.cell_vertices[c][FACE_VERTICES[f][0]] != mesh.edge_vertices[e][0]:
                    d = d[::-1]
                cell_dofs[r, fe.face_interior(f)] = d
            cell_dofs[r, fe.cell_interior()] = np.arange(n, n + mi)
            n += mi
        self.cell_dofs = cell_dofs
        self.n_dofs = n
        self._support = None
        self.hanging = self._hanging_constraints(users)

    def _hanging_constraints(self, users):
        mesh, k = self.mesh, self.degree
        nodes = np.linspace(0.0, 1.0, k + 1)
        lines = {}
        for e in sorted(users):
            kids = mesh.edge_children[e]
            if kids is None or not all(kc in users for kc in kids):
                continue
            a, b = mesh.edge_vertices[e]
            mid = mesh.edge_mid[e]
            masters = [self.vertex_dof[a], *self.edge_dof[e], self.vertex_dof[b]]
            where = {a: 0.0, mid: 0.5, b: 1.0}
            slaves = [(self.vertex_dof[mid], 0.5)]
            for kc in kids:
                s, t = mesh.edge_vertices[kc]
                for j, d in enumerate(self.edge_dof[kc], start=1):
                    slaves.append((d, where[s] + (j / k) * (where[t] - where[s])))
            w, _ = lagrange_1d(nodes, np.array([t for _, t in slaves]))
            for (d, _), row in zip(slaves, w):
                lines[int(d)] = [(int(mm), float(x)) for mm, x in zip(masters, row) if abs(x) > 1e-14]
        return lines

    @property
    def support_points(self):
        if self._support is None:
            geo = CellGeometry(self.mesh, self.cells)
            x, _ = geo.map_points(self.fe.support_points)
            pts = np.empty((self.n_dofs, 2))
            pts[self.cell_dofs.ravel()] = x.reshape(-1, 2)
            self._support = pts
        return self._support

    def boundary_dofs(self, ids):
        """DoFs on active boundary faces with an id in ``ids``."""
        out = set()
        for c, f, _ in self.mesh.boundary_faces(ids):
            r = self.row_of(c)
            i, j = FACE_VERTICES[f]
            local = [i, j, *self.fe.face_interior(f)]
            out.update(int(d) for d in self.cell_dofs[r, local])
        return np.array(sorted(out), dtype=np.int64)

    def face_dofs(self, c, f):
        r = self.row_of(c)
        i, j = FACE_VERTICES[f]
        return self.cell_dofs[r, [i, j, *self.fe.face_interior(f)]]

    def row_of(self, c):
        if not hasattr(self, "_rows"):
            self._rows = {int(cc): r for r, cc in enumerate(self.cells)}
        return self._rows[c]


class MixedSpace:
    """The monolithic space for (v_x, v_y, u_x, u_y, p).

    Velocity and displacement share a degree ``kv``, the pressure uses ``kp``.
    Global layout is component-blocked: ``[vx | vy | ux | uy | p]``.
    """

    def __init__(self, mesh, degrees=(2, 1)):
        kv, kp = degrees
        self.mesh = mesh
        self.degrees = (kv, kp)
        self.hv = DofHandler(mesh, kv)
        self.hp = self.hv if kp == kv else DofHandler(mesh, kp)
        nv, np_ = self.hv.n_dofs, self.hp.n_dofs
        self.offsets = np.array([0, nv, 2 * nv, 3 * nv, 4 * nv, 4 * nv + np_])
        self.n_dofs = int(self.offsets[-1])
        self.cells = self.hv.cells
        cv, cp = self.hv.cell_dofs, self.hp.cell_dofs
        self.cell_dofs = np.hstack([cv + self.offsets[c] for c in range(4)] + [cp + self.offsets[4]])
        self.n_loc_v = cv.shape[1]
        self.n_loc_p = cp.shape[1]
        self.local_offsets = np.array([0, 1, 2, 3, 4, 4]) * self.n_loc_v
        self.local_offsets[5] = 4 * self.n_loc_v + self.n_loc_p

    def handler(self, comp):
        return self.hp if comp == 4 else self.hv

    def component_slice(self, comp):
        return slice(int(self.offsets[comp]), int(self.offsets[comp + 1]))

    def component_dofs(self, comp, scalar_dofs):
        return np.asarray(scalar_dofs, dtype=np.int64) + self.offsets[comp]

    def local_block(self, comp):
        return slice(int(self.local_offsets[comp]), int(self.local_offsets[comp + 1]))

    def interior_dofs(self):
        """``(n_cells, m)`` global DoFs owned by a single cell (no face/vertex support)."""
        cols = [self.local_block(c).start + self.handler(c).fe.cell_interior() for c in range(5)]
        return self.cell_dofs[:, np.concatenate(cols)]

    def interpolate(self, funcs):
        """Nodal interpolant; ``funcs`` maps component index -> f(x, y)."""
        U = np.zeros(self.n_dofs)
        for comp, f in funcs.items():
            pts = self.handler(comp).support_points
            U[self.component_slice(comp)] = f(pts[:, 0], pts[:, 1])
        return U
