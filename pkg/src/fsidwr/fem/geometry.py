"""Cell geometry maps.

Straight-sided cells use the bilinear map. Cells with a face on a boundary
that carries a :class:`~fsidwr.mesh.CircleManifold` use transfinite (Coons)
interpolation with the exact arc on that face, so the cylinder is represented
without polygonal error. All other faces stay straight, which keeps shared
faces (including faces with hanging vertices) conforming.
"""
from __future__ import annotations

import numpy as np

from ..mesh import FACE_VERTICES, _wrap_angle


class InvalidGeometryError(RuntimeError):
    pass


class CellGeometry:
    """Vectorized geometry of a list of cells."""

    def __init__(self, mesh, cells):
        self.cells = np.asarray(cells, dtype=int)
        n = len(self.cells)
        pts = mesh.points
        cv = np.array([mesh.cell_vertices[c] for c in self.cells], dtype=int).reshape(n, 4)
        self.corners = pts[cv]
        self.curved = np.zeros((n, 4), dtype=bool)
        self.center = np.zeros((n, 4, 2))
        self.radius = np.zeros((n, 4))
        self.theta0 = np.zeros((n, 4))
        self.dtheta = np.zeros((n, 4))
        if mesh.manifolds:
            for r, c in enumerate(self.cells):
                for f, e in enumerate(mesh.cell_edges[c]):
                    man = mesh.manifolds.get(mesh.edge_boundary[e])
                    if man is None:
                        continue
                    a = pts[cv[r, FACE_VERTICES[f][0]]]
                    b = pts[cv[r, FACE_VERTICES[f][1]]]
                    ta, tb = man.angle(a), man.angle(b)
                    self.curved[r, f] = True
                    self.center[r, f] = man.center
                    self.radius[r, f] = man.radius
                    self.theta0[r, f] = ta
                    self.dtheta[r, f] = _wrap_angle(tb - ta)
        self.any_curved = bool(self.curved.any())

    def __len__(self):
        return len(self.cells)

    def subset(self, idx):
        new = object.__new__(CellGeometry)
        for name in ("cells", "corners", "curved", "center", "radius", "theta0", "dtheta"):
            setattr(new, name, getattr(self, name)[idx])
        new.any_curved = bool(new.curved.any())
        return new

    def _edge(self, f, t):
        """Face curve ``f`` and its derivative at parameters ``t`` (shape (n, q))."""
        i, j = FACE_VERTICES[f]
        a = self.corners[:, i, None, :]
        b = self.corners[:, j, None, :]
        x = a + t[..., None] * (b - a)
        dx = np.broadcast_to(b - a, x.shape).copy()
        if self.any_curved:
            cur = self.curved[:, f]
            if cur.any():
                th = self.theta0[cur, f, None] + t[cur] * self.dtheta[cur, f, None]
                r = self.radius[cur, f, None]
                c = self.center[cur, f, None, :]
                x[cur] = c + r[..., None] * np.stack([np.cos(th), np.sin(th)], axis=-1)
                rd = (r * self.dtheta[cur, f, None])[..., None]
                dx[cur] = rd * np.stack([-np.sin(th), np.cos(th)], axis=-1)
        return x, dx

    def map_points(self, ref):
        """Physical points and Jacobians ``dx_i/dxi_j`` at reference points.

        ``ref`` is ``(q, 2)`` shared by all cells or ``(n, q, 2)`` per cell.
        Returns ``x`` of shape ``(n, q, 2)`` and ``jac`` of shape ``(n, q, 2, 2)``.
        """
        n = len(self.cells)
        ref = np.asarray(ref, dtype=float)
        if ref.ndim == 2:
            ref = np.broadcast_to(ref, (n,) + ref.shape)
        xi, eta = ref[..., 0], ref[..., 1]
        e0, d0 = self._edge(0, xi)
        e1, d1 = self._edge(1, eta)
        e2, d2 = self._edge(2, xi)
        e3, d3 = self._edge(3, eta)
        v = self.corners[:, :, None, :]
        X, E = xi[..., None], eta[..., None]
        bil = ((1 - X) * (1 - E) * v[:, 0] + X * (1 - E) * v[:, 1]
               + X * E * v[:, 2] + (1 - X) * E * v[:, 3])
        x = (1 - E) * e0 + E * e2 + (1 - X) * e3 + X * e1 - bil
        dbx = -(1 - E) * v[:, 0] + (1 - E) * v[:, 1] + E * v[:, 2] - E * v[:, 3]
        dby = -(1 - X) * v[:, 0] - X * v[:, 1] + X * v[:, 2] + (1 - X) * v[:, 3]
        dxi = (1 - E) * d0 + E * d2 - e3 + e1 - dbx
        deta = -e0 + e2 + (1 - X) * d3 + X * d1 - dby
        jac = np.stack([dxi, deta], axis=-1)
        return x, jac


def det2(a):
    return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]


def inv2(a):
    d = det2(a)
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1] / d
    out[..., 1, 1] = a[..., 0, 0] / d
    out[..., 0, 1] = -a[..., 0, 1] / d
    out[..., 1, 0] = -a[..., 1, 0] / d
    return out


def face_normal_and_measure(jac, face):
    """Outward unit normals and line measure on local face ``face``.

    ``jac`` are geometry Jacobians evaluated on that face.
    """
    tangent = jac[..., :, 0] if face in (0, 2) else jac[..., :, 1]
    sign = 1.0 if face in (0, 1) else -1.0
    ds = np.linalg.norm(tangent, axis=-1)
    normal = sign * np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1) / ds[..., None]
    return normal, ds
