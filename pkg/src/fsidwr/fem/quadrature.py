"""Tensor Gauss quadrature on the unit square and the unit interval."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Quadrature:
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return len(self.weights)


def gauss_line(n):
    """n-point Gauss rule on [0, 1]; exact for degree 2n - 1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return Quadrature(0.5 * (x + 1.0), 0.5 * w)


def gauss_square(n):
    """n x n tensor Gauss rule on [0, 1]^2."""
    q = gauss_line(n)
    X, Y = np.meshgrid(q.points, q.points, indexing="xy")
    W = np.outer(q.weights, q.weights)
    return Quadrature(np.column_stack([X.ravel(), Y.ravel()]), W.ravel())


def face_points(face, t):
    """Map edge parameters ``t`` in [0, 1] to reference points on local face ``face``."""
    t = np.asarray(t, dtype=float)
    zero, one = np.zeros_like(t), np.ones_like(t)
    if face == 0:
        return np.column_stack([t, zero])
    if face == 1:
        return np.column_stack([one, t])
    if face == 2:
        return np.column_stack([t, one])
    if face == 3:
        return np.column_stack([zero, t])
    raise ValueError(f"bad face index {face}")
