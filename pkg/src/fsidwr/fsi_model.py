"""Monolithic FSI system on the reference mesh: assembly, condensation, Newton.

Cells carry a material tag. Fluid cells contribute the ALE Navier-Stokes
terms plus a harmonic mesh-motion extension for ``u``; solid cells the
St. Venant-Kirchhoff terms, the kinematic relation ``v = 0`` and a tiny
pressure extension.

The mesh-motion rows of displacement DoFs on the fluid-solid interface are
dropped after condensation: there ``u`` is set by the solid, and the
extension equation only acts in the interior of the fluid domain.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import physics
from .fem import MixedSpace, build_constraints, face_basis, face_points, gauss_line, gauss_square, jets
from .fem.values import Basis
from .kernels import block_mask, local_matrices, local_vectors
from .linalg import CondensedFactorization, Factorization, SolverError, check_finite, scatter_matrix, scatter_vector
from .mesh import FLUID, SOLID, interface_faces
from .physics import FsiParameters, InvalidStateError

log = logging.getLogger(__name__)

__all__ = ["FsiParameters", "FsiProblem", "InvalidStateError", "NewtonError", "NewtonResult",
           "newton_solve", "solve"]

MESH_JET = slice(6, 12)


class NewtonError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


class FsiProblem:
    """Discrete FSI operator on one mesh.

    ``dirichlet`` is passed to :func:`build_constraints`; ``outflow_ids`` are
    the boundary ids receiving the do-nothing correction (empty disables it).
    """

    def __init__(self, mesh, params=None, dirichlet=(), degrees=(2, 1), outflow_ids=(1,),
                 chunk=256, quad_points=None, solver=None):
        self.mesh = mesh
        self.params = params or FsiParameters()
        self.space = MixedSpace(mesh, degrees)
        self.dirichlet = list(dirichlet)
        self.constraints = build_constraints(self.space, self.dirichlet)
        self.hom = self.constraints.homogeneous()
        self.outflow_ids = tuple(outflow_ids)
        self.chunk = chunk
        self.solver = solver
        nq = quad_points or degrees[0] + 1
        self.quad = gauss_square(nq)
        self.fquad = gauss_line(nq)
        mat = np.array([mesh.cell_material[c] for c in self.space.cells])
        self.rows = {FLUID: np.flatnonzero(mat == FLUID), SOLID: np.flatnonzero(mat == SOLID)}
        self.outflow_faces = self._outflow_faces()
        self.keep = self._mesh_row_mask()

    @property
    def n_dofs(self):
        return self.space.n_dofs

    def _outflow_faces(self):
        out = {}
        hv = self.space.hv
        for c, f, _ in self.mesh.boundary_faces(self.outflow_ids):
            if self.mesh.cell_material[c] == FLUID:
                out.setdefault(f, []).append(hv.row_of(c))
        return {f: np.array(r) for f, r in out.items()}

    def interface_u_dofs(self):
        """Global displacement DoFs on the fluid-solid interface."""
        hv, mesh = self.space.hv, self.mesh
        scalar = set()
        for c, f in interface_faces(mesh):
            scalar.update(int(d) for d in hv.face_dofs(c, f))
            for k, g in mesh.face_neighbors(c, f):
                scalar.update(int(d) for d in hv.face_dofs(k, g))
        s = np.array(sorted(scalar), dtype=np.int64)
        return np.concatenate([self.space.component_dofs(2, s), self.space.component_dofs(3, s)])

    def _mesh_row_mask(self):
        keep = np.ones(self.space.n_dofs)
        keep[self.interface_u_dofs()] = 0.0
        return keep

    # -- pointwise data ----------------------------------------------------

    def initial_guess(self):
        return self.constraints.distribute(np.zeros(self.n_dofs))

    def cell_chunks(self):
        for mat in (FLUID, SOLID):
            rows = self.rows[mat]
            for i in range(0, len(rows), self.chunk):
                yield mat, rows[i:i + self.chunk]

    def face_chunks(self):
        for f, rows in sorted(self.outflow_faces.items()):
            for i in range(0, len(rows), self.chunk):
                yield f, rows[i:i + self.chunk]

    def _state(self, basis, U, state_space, rows, ref, weights, face=None):
        if state_space is None or state_space is self.space:
            return jets(self.space, U, basis)
        sb = Basis(state_space, rows, ref, weights, face=face)
        return jets(state_space, U, sb)

    def cell_terms(self, mat, rows, U, state_space=None, tangent=False):
        """Basis, (main flux, mesh flux) and optionally tangents on a cell chunk."""
        q = self.quad
        b = Basis(self.space, rows, q.points, q.weights)
        jet = self._state(b, U, state_space, rows, q.points, q.weights)
        prm = self.params
        kin = physics.Kinematics(jet)
        if mat == FLUID:
            flux = physics.fluid_flux(jet, prm, kin)
            fmesh = np.zeros_like(flux)
            fmesh[..., MESH_JET] = flux[..., MESH_JET]
            flux[..., MESH_JET] = 0.0
            if not tangent:
                return b, flux, fmesh
            C = physics.fluid_tangent(jet, prm, kin)
            Cmesh = np.zeros_like(C)
            Cmesh[..., MESH_JET, :] = C[..., MESH_JET, :]
            C[..., MESH_JET, :] = 0.0
            return b, flux, fmesh, C, Cmesh
        flux = physics.solid_flux(jet, prm, kin)
        if not tangent:
            return b, flux, None
        return b, flux, None, physics.solid_tangent(jet, prm, kin), None

    def face_terms(self, face, rows, U, state_space=None, tangent=False):
        b = face_basis(self.space, rows, face, self.fquad)
        ref = face_points(face, self.fquad.points)
        jet = self._state(b, U, state_space, rows, ref, self.fquad.weights, face=face)
        kin = physics.Kinematics(jet)
        flux = physics.do_nothing_flux(jet, b.normal, self.params, kin)
        if not tangent:
            return b, flux
        return b, flux, physics.do_nothing_tangent(jet, b.normal, self.params, kin)

    # -- global assembly -----------------------------------------------------

    def assemble(self, U, vector=True, matrix=False, state_space=None):
        """Unconstrained residual and Jacobian, split into (main, mesh) parts.

        With ``state_space`` set, ``U`` lives in that space and is evaluated at
        the quadrature points of this problem's space (used for the adjoint in
        a richer space, where the Jacobian is taken at the primal state).
        """
        n = self.n_dofs
        cd = self.space.cell_dofs
        r_main = np.zeros(n) if vector else None
        r_mesh = np.zeros(n) if vector else None
        K_main = sp.csr_matrix((n, n)) if matrix else None
        K_mesh = sp.csr_matrix((n, n)) if matrix else None
        for mat, rows in self.cell_chunks():
            out = self.cell_terms(mat, rows, U, state_space, tangent=matrix)
            b, flux, fmesh = out[:3]
            if vector:
                r_main += scatter_vector(local_vectors(b.Bv, b.Bp, b.JxW, flux), cd[rows], n)
                if fmesh is not None:
                    r_mesh += scatter_vector(local_vectors(b.Bv, b.Bp, b.JxW, fmesh), cd[rows], n)
            if matrix:
                C, Cmesh = out[3], out[4]
                K_main = K_main + scatter_matrix(local_matrices(b.Bv, b.Bp, b.JxW, C), cd[rows], n)
                if Cmesh is not None:
                    Kl = local_matrices(b.Bv, b.Bp, b.JxW, Cmesh, mask=block_mask(Cmesh))
                    K_mesh = K_mesh + scatter_matrix(Kl, cd[rows], n)
        for f, rows in self.face_chunks():
            out = self.face_terms(f, rows, U, state_space, tangent=matrix)
            b = out[0]
            if vector:
                r_main += scatter_vector(local_vectors(b.Bv, b.Bp, b.JxW, out[1]), cd[rows], n)
            if matrix:
                K_main = K_main + scatter_matrix(local_matrices(b.Bv, b.Bp, b.JxW, out[2]), cd[rows], n)
        return r_main, r_mesh, K_main, K_mesh

    def condense_residual(self, r_main, r_mesh):
        PT = self.hom.PT
        return PT @ r_main + self.keep * (PT @ r_mesh)

    def condense_jacobian(self, K_main, K_mesh):
        P, PT = self.hom.P, self.hom.PT
        Kc = PT @ K_main @ P + sp.diags(self.keep) @ (PT @ K_mesh @ P)
        Kc = Kc.tocsr()
        return Kc + sp.diags(self.hom.constrained * self.hom.diagonal_scale(Kc))

    def factorize(self, K):
        """LU of a condensed Jacobian; cell-interior DoFs are eliminated first."""
        interior = self.space.interior_dofs()
        if interior.shape[1] == 0:
            return Factorization(K, self.solver)
        return CondensedFactorization(K, interior, self.solver)

    def residual(self, U):
        """Condensed residual; zero on constrained rows."""
        r_main, r_mesh, _, _ = self.assemble(U)
        r = self.condense_residual(r_main, r_mesh)
        check_finite(r, "residual")
        return r

    def jacobian(self, U, state_space=None):
        _, _, K_main, K_mesh = self.assemble(U, vector=False, matrix=True, state_space=state_space)
        return self.condense_jacobian(K_main, K_mesh)

    def residual_and_jacobian(self, U):
        r_main, r_mesh, K_main, K_mesh = self.assemble(U, matrix=True)
        return self.condense_residual(r_main, r_mesh), self.condense_jacobian(K_main, K_mesh)


@dataclass
class NewtonResult:
    U: np.ndarray
    iterations: int
    history: list = field(default_factory=list)
    converged: bool = True


def newton_solve(residual, jacobian, U0, distribute, rtol=1e-8, atol=1e-10, max_iter=20,
                 max_backtracks=10, factorize=None):
    """Damped Newton iteration on a condensed system.

    ``residual(U)`` and ``jacobian(U)`` return the condensed residual and
    matrix; ``distribute(dU)`` expands a condensed update to a full one
    (homogeneous constraints); ``factorize(K)`` returns an object with a
    ``solve`` method (default: sparse LU). The step is halved until the residual norm
    decreases. States where the ALE map folds count as failed trials.
    """
    factorize = factorize or Factorization
    U = np.array(U0, dtype=float)
    r = residual(U)
    norm = float(np.linalg.norm(r))
    history = [norm]
    tol = max(rtol * norm, atol)
    it = 0
    while norm > tol:
        if it >= max_iter:
            raise NewtonError(f"no convergence in {max_iter} iterations (residual {norm:.3e})", history)
        K = jacobian(U)
        try:
            dU = distribute(factorize(K).solve(-r))
        except SolverError as exc:
            raise NewtonError(f"linear solve failed: {exc}", history) from exc
        step = 1.0
        for _ in range(max_backtracks + 1):
            trial = U + step * dU
            try:
                rt = residual(trial)
                nt = float(np.linalg.norm(rt))
            except (InvalidStateError, FloatingPointError):
                nt = np.inf
            if nt < norm:
                break
            step *= 0.5
        else:
            raise NewtonError(f"line search failed at iteration {it + 1}", history)
        U, r, norm = trial, rt, nt
        it += 1
        history.append(norm)
        log.info("newton %2d  |r| = %.3e  step %.3g", it, norm, step)
    return NewtonResult(U, it, history, True)


def solve(problem, U0=None, **kw):
    """Newton solve of an :class:`FsiProblem` starting from ``U0`` (or zero)."""
    U0 = problem.initial_guess() if U0 is None else problem.constraints.distribute(U0)
    return newton_solve(problem.residual, problem.jacobian, U0, problem.hom.distribute,
                        factorize=problem.factorize, **kw)
