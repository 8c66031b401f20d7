"""Goal-oriented error estimation with partition-of-unity localization.

The adjoint is solved with every field one polynomial degree pair higher
(Q4/Q4/Q2 for a Q2/Q2/Q1 primal space) on the same mesh, with the Jacobian
taken at the primal state. The weight ``z - i_h z`` is localized by the
nodal hat functions of the Q1 space, whose hanging constraints are folded
back onto the free nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .fem import DofHandler, build_constraints, face_points, jets, scalar_constraints
from .fem.elements import element
from .fem.geometry import inv2
from .fem.values import geometry
from .fsi_model import FsiProblem, newton_solve
from .goals import goal_derivative

__all__ = ["ErrorEstimate", "PartitionOfUnity", "adjoint_problem", "compute_indicators",
           "embed", "interpolate_down", "mark_cells", "solve_adjoint", "weighted_residual"]


def adjoint_problem(primal):
    """Higher-order twin of ``primal`` with homogeneous Dirichlet data."""
    kv, kp = primal.space.degrees
    hom = [(bid, fld, None) for bid, fld, _ in primal.dirichlet]
    return FsiProblem(primal.mesh, primal.params, hom, degrees=(2 * kv, 2 * kp),
                      outflow_ids=primal.outflow_ids, chunk=max(32, primal.chunk // 4),
                      solver=primal.solver)


@dataclass
class AdjointResult:
    z: np.ndarray
    iterations: int = 1


def solve_adjoint(adjoint, primal_space, U, params, spec, newton=False):
    """Solve ``A'(U)(phi, z) = J'(U)(phi)`` in the space of ``adjoint``.

    With ``newton=True`` the linear system is run through the generic Newton
    driver, which must stop after a single step.
    """
    K = adjoint.jacobian(U, state_space=primal_space)
    rhs = adjoint.hom.PT @ goal_derivative(adjoint.space, U, params, spec, state_space=primal_space)
    lu = adjoint.factorize(K)
    if not newton:
        z = lu.solve(rhs, trans=True)
        return AdjointResult(adjoint.hom.distribute(z), 1)

    class _Transposed:
        """Factorization of K^T, reusing the LU of K."""

        @staticmethod
        def solve(b):
            return lu.solve(b, trans=True)

    KT = K.T.tocsr()
    res = newton_solve(lambda x: KT @ x - rhs, lambda x: KT, np.zeros_like(rhs), lambda d: d,
                       rtol=1e-8, atol=1e-14, factorize=lambda _: _Transposed)
    return AdjointResult(adjoint.hom.distribute(res.U), res.iterations)


# -- interpolation between the nested spaces -------------------------------------

def _nested_map(h_hi, h_lo):
    """Local indices of the low-order nodes inside the high-order element."""
    r = h_hi.degree // h_lo.degree
    if r * h_lo.degree != h_hi.degree:
        raise ValueError("degrees are not nested")
    return np.array([h_hi.fe.lookup[(i * r, j * r)] for i, j in h_lo.fe.node_ij])


def interpolate_down(space_hi, space_lo, z, constraints_lo=None):
    """Nodal interpolant of a high-order field in the low-order space.

    Low-order DoFs take the values of ``z`` at their support points (which
    are nodes of the high-order element); constraints are then re-applied.
    """
    out = np.zeros(space_lo.n_dofs)
    for c in range(5):
        hh, hl = space_hi.handler(c), space_lo.handler(c)
        loc = _nested_map(hh, hl)
        src = z[space_hi.component_slice(c)]
        dst = out[space_lo.component_slice(c)]
        dst[hl.cell_dofs.ravel()] = src[hh.cell_dofs[:, loc].ravel()]
    cs = constraints_lo if constraints_lo is not None else build_constraints(space_lo)
    return cs.distribute(out)


def embed(space_lo, space_hi, x):
    """Coefficients in the high-order space of a low-order field (exact)."""
    out = np.zeros(space_hi.n_dofs)
    for c in range(5):
        hh, hl = space_hi.handler(c), space_lo.handler(c)
        V = hl.fe.values(hh.fe.support_points)  # (n_hi, n_lo)
        src = x[space_lo.component_slice(c)]
        dst = out[space_hi.component_slice(c)]
        dst[hh.cell_dofs] = src[hl.cell_dofs] @ V.T
    return out


# -- partition of unity --------------------------------------------------------

class PartitionOfUnity:
    """Q1 hat functions on the active mesh, condensed onto free nodes."""

    def __init__(self, mesh):
        self.handler = h = DofHandler(mesh, 1)
        self.constraints = scalar_constraints(h)
        self.free = self.constraints.free
        n_cells = len(h.cells)
        inc = sp.csr_matrix((np.ones(h.cell_dofs.size), (np.repeat(np.arange(n_cells), 4),
                                                         h.cell_dofs.ravel())),
                            shape=(n_cells, h.n_dofs))
        # cells in the support of each condensed hat function
        self.support = (inc @ self.constraints.P).tocsc()[:, self.free]
        self.support.data[:] = 1.0
        self.support.eliminate_zeros()

    @property
    def size(self):
        return len(self.free)

    def basis(self, space, rows, ref):
        """Values and physical gradients ``(E, Q, 3, 4)`` of the hat functions."""
        geo = geometry(space).subset(np.asarray(rows))
        _, jac = geo.map_points(ref)
        jinv = inv2(jac)
        fe = element(1)
        grd = np.einsum("eqji,qnj->eqni", jinv, fe.gradients(ref))
        out = np.empty(grd.shape[:2] + (3, 4))
        out[:, :, 0] = fe.values(ref)
        out[:, :, 1] = grd[..., 0]
        out[:, :, 2] = grd[..., 1]
        return out

    def condense(self, local, rows):
        """Sum cell-local contributions ``(E, 4)`` into the free nodes."""
        h = self.handler
        full = np.bincount(h.cell_dofs[rows].ravel(), weights=local.ravel(), minlength=h.n_dofs)
        return (self.constraints.PT @ full)[self.free]


def _product_jet(wjet, chi):
    """Jets of ``w * chi_a`` for the four hat functions; shape ``(E, Q, 4, 15)``."""
    from .fem.values import COMP_IDX

    out = np.empty(wjet.shape[:2] + (4, wjet.shape[-1]))
    val, dx, dy = chi[:, :, 0], chi[:, :, 1], chi[:, :, 2]
    for c in range(5):
        i0, i1, i2 = COMP_IDX[c]
        w0 = wjet[..., i0, None]
        out[..., i0] = w0 * val
        out[..., i1] = wjet[..., i1, None] * val + w0 * dx
        out[..., i2] = wjet[..., i2, None] * val + w0 * dy
    return out


@dataclass
class ErrorEstimate:
    eta_i: np.ndarray
    cell_indicators: np.ndarray
    weighted_residual: float
    true_error: Optional[float] = None
    extras: dict = field(default_factory=dict)

    @property
    def eta(self):
        return float(np.sum(self.eta_i))

    @property
    def eta_abs(self):
        return float(np.sum(np.abs(self.eta_i)))

    @property
    def n_nodes(self):
        return len(self.eta_i)

    @property
    def effectivity(self):
        if self.true_error is None or self.true_error == 0.0:
            return None
        return abs(self.eta) / abs(self.true_error)

    @property
    def indicator_index(self):
        if self.true_error is None or self.true_error == 0.0:
            return None
        return self.eta_abs / abs(self.true_error)


def _weights(adjoint, primal_space, z):
    """``z - i_h z`` and the same for the mesh-motion test (interface DoFs removed)."""
    lo_cs = build_constraints(primal_space)
    w = z - embed(primal_space, adjoint.space, interpolate_down(adjoint.space, primal_space, z, lo_cs))
    zm = adjoint.hom.distribute(adjoint.keep * z)
    wm = zm - embed(primal_space, adjoint.space, interpolate_down(adjoint.space, primal_space, zm, lo_cs))
    return w, wm


def compute_indicators(adjoint, primal_space, U, z, pu=None, reference=None, goal_value=None):
    """Nodal error indicators ``eta_i = -rho(U)((z - i_h z) chi_i)``.

    ``reference`` and ``goal_value`` (if both given) fill in the true error
    ``J_ref - J(U_h)``.
    """
    pu = pu or PartitionOfUnity(adjoint.mesh)
    w, wm = _weights(adjoint, primal_space, z)
    n_cells = len(adjoint.space.cells)
    local = np.zeros((n_cells, 4))
    for mat, rows in adjoint.cell_chunks():
        b, flux, fmesh = adjoint.cell_terms(mat, rows, U, state_space=primal_space)
        chi = pu.basis(adjoint.space, rows, adjoint.quad.points)
        T = _product_jet(jets(adjoint.space, w, b), chi)
        val = np.einsum("eqk,eqak->eqa", flux, T)
        if fmesh is not None:
            Tm = _product_jet(jets(adjoint.space, wm, b), chi)
            val += np.einsum("eqk,eqak->eqa", fmesh, Tm)
        local[rows] -= np.einsum("eq,eqa->ea", b.JxW, val)
    for f, rows in adjoint.face_chunks():
        b, flux = adjoint.face_terms(f, rows, U, state_space=primal_space)
        chi = pu.basis(adjoint.space, rows, face_points(f, adjoint.fquad.points))
        T = _product_jet(jets(adjoint.space, w, b), chi)
        local[rows] -= np.einsum("eq,eqk,eqak->ea", b.JxW, flux, T)
    rows_all = np.arange(n_cells)
    eta_i = pu.condense(local, rows_all)
    cell = np.abs(local).sum(axis=1)
    true = None
    if reference is not None and goal_value is not None:
        true = reference - goal_value
    est = ErrorEstimate(eta_i, cell, weighted_residual(adjoint, primal_space, U, w, wm), true)
    est.extras["pu"] = pu
    return est


def weighted_residual(adjoint, primal_space, U, w, wm):
    """``-rho(U)(w)`` assembled globally, without localization."""
    r_main, r_mesh, _, _ = adjoint.assemble(U, state_space=primal_space)
    return -float(r_main @ w + r_mesh @ wm)


def mark_cells(estimate, n_cells, alpha=1.0, strategy="pu-threshold", fraction=0.3):
    """Active-cell rows touching PU nodes with large ``|eta_i|``.

    ``pu-threshold``: nodes with ``|eta_i| >= alpha * sum|eta_i| / n_cells``.
    ``dof-fraction``: the ``fraction`` of nodes with the largest ``|eta_i|``.
    """
    pu = estimate.extras["pu"]
    mag = np.abs(estimate.eta_i)
    if strategy == "pu-threshold":
        nodes = np.flatnonzero(mag >= alpha * estimate.eta_abs / n_cells)
    elif strategy == "dof-fraction":
        k = int(math.ceil(fraction * mag.size))
        nodes = np.argsort(-mag, kind="stable")[:k]
    else:
        raise ValueError(f"unknown marking strategy {strategy!r}")
    if nodes.size == 0:
        return np.array([], dtype=int)
    hit = pu.support[:, nodes].sum(axis=1)
    return np.flatnonzero(np.asarray(hit).ravel() > 0)
