"""Tensor-product Lagrange elements on the reference square [0, 1]^2."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


def lagrange_1d(nodes, t):
    """Values and derivatives of the 1D Lagrange basis on ``nodes`` at points ``t``.

    Returns arrays of shape ``(len(t), len(nodes))``.
    """
    t = np.asarray(t, dtype=float)
    n = len(nodes)
    val = np.ones((t.size, n))
    der = np.zeros((t.size, n))
    for i in range(n):
        for m in range(n):
            if m == i:
                continue
            denom = nodes[i] - nodes[m]
            # product rule: d/dt prod_m (t - x_m)/(x_i - x_m)
            der[:, i] = der[:, i] * (t - nodes[m]) / denom + val[:, i] / denom
            val[:, i] *= (t - nodes[m]) / denom
    return val, der


class ScalarElement:
    """Continuous Q_k element with equispaced nodes, k in {1, 2, 4}.

    Local node order: 4 vertices (v0..v3), interior nodes of faces 0..3 in
    the face direction, then cell-interior nodes row by row.
    """

    def __init__(self, degree):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        k = self.degree = degree
        self.nodes_1d = np.linspace(0.0, 1.0, k + 1)
        ij = [(0, 0), (k, 0), (k, k), (0, k)]
        ij += [(i, 0) for i in range(1, k)]
        ij += [(k, j) for j in range(1, k)]
        ij += [(i, k) for i in range(1, k)]
        ij += [(0, j) for j in range(1, k)]
        ij += [(i, j) for j in range(1, k) for i in range(1, k)]
        self.node_ij = np.array(ij, dtype=int)
        self.n_dofs = len(ij)
        self.support_points = self.node_ij / k
        self.lookup = {tuple(p): a for a, p in enumerate(ij)}

    @property
    def n_face_interior(self):
        return self.degree - 1

    def face_interior(self, f):
        """Local indices of the interior nodes of face ``f``, in face direction."""
        m = self.degree - 1
        return np.arange(4 + f * m, 4 + (f + 1) * m)

    def cell_interior(self):
        return np.arange(4 + 4 * (self.degree - 1), self.n_dofs)

    def values(self, points):
        points = np.atleast_2d(points)
        vx, _ = lagrange_1d(self.nodes_1d, points[:, 0])
        vy, _ = lagrange_1d(self.nodes_1d, points[:, 1])
        i, j = self.node_ij.T
        return vx[:, i] * vy[:, j]

    def gradients(self, points):
        """Reference gradients, shape ``(n_points, n_dofs, 2)``."""
        points = np.atleast_2d(points)
        vx, dx = lagrange_1d(self.nodes_1d, points[:, 0])
        vy, dy = lagrange_1d(self.nodes_1d, points[:, 1])
        i, j = self.node_ij.T
        return np.stack([dx[:, i] * vy[:, j], vx[:, i] * dy[:, j]], axis=-1)


@lru_cache(maxsize=None)
def element(degree):
    return ScalarElement(degree)
