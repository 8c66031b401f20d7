"""Sparse assembly helpers and the sparse direct solver contract."""
from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

try:
    from cvxopt import matrix as _cvx_matrix, spmatrix as _cvx_spmatrix, umfpack as _umfpack
except ImportError:  # pragma: no cover
    _umfpack = None

DEFAULT_BACKEND = "umfpack" if _umfpack is not None else "superlu"
# normwise backward error accepted when the relative residual stalls above rtol
BACKWARD_TOL = 1e-13


class SolverError(RuntimeError):
    """Singular matrix or a solve that misses the residual target."""


def sparsity_pattern(cell_dofs, n):
    """Symmetric CSR pattern coupling all DoFs that share a cell."""
    E, k = cell_dofs.shape
    rows = np.repeat(cell_dofs, k, axis=1).ravel()
    cols = np.tile(cell_dofs, (1, k)).ravel()
    A = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    A.data[:] = 1.0
    return A


def scatter_vector(local, cell_dofs, n):
    return np.bincount(cell_dofs.ravel(), weights=local.ravel(), minlength=n)


def scatter_matrix(local, cell_dofs, n, rows_mask=None):
    """Sum local matrices into a CSR matrix; ``rows_mask`` keeps selected local rows."""
    E, k = cell_dofs.shape
    rows = np.repeat(cell_dofs, k, axis=1).reshape(E, k, k)
    cols = np.broadcast_to(cell_dofs[:, None, :], (E, k, k))
    vals = local
    if rows_mask is not None:
        vals = local * rows_mask[None, :, None]
    keep = vals != 0.0
    return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))


def check_finite(x, what="vector"):
    data = x.data if sp.issparse(x) else x
    if not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite entries in {what}")


class Factorization:
    """LU factorization of a square sparse matrix supporting A and A^T solves."""

    def __init__(self, A, backend=None):
        self.backend = backend or DEFAULT_BACKEND
        self.A = sp.csc_matrix(A)
        if self.A.shape[0] != self.A.shape[1]:
            raise ValueError("matrix must be square")
        check_finite(self.A, "matrix")
        try:
            if self.backend == "umfpack":
                Acoo = self.A.tocoo()
                self._cvx = _cvx_spmatrix(_cvx_matrix(Acoo.data), _cvx_matrix(Acoo.row.astype(np.int64)),
                                          _cvx_matrix(Acoo.col.astype(np.int64)), size=self.A.shape)
                self._sym = _umfpack.symbolic(self._cvx)
                self._num = _umfpack.numeric(self._cvx, self._sym)
            else:
                self._lu = spla.splu(self.A, permc_spec="COLAMD")
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            raise SolverError(f"factorization failed: {exc}") from exc

    def fallback(self):
        """Refactor with SuperLU; returns False if already on it."""
        if self.backend == "superlu":
            return False
        log.warning("UMFPACK solve inaccurate, refactoring with SuperLU")
        try:
            self._lu = spla.splu(self.A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc
        self.backend = "superlu"
        return True

    def _raw(self, b, trans):
        if self.backend == "umfpack":
            x = _cvx_matrix(np.asarray(b, dtype=float).copy())
            _umfpack.solve(self._cvx, self._num, x, trans="T" if trans else "N")
            return np.array(x).ravel()
        return self._lu.solve(b, trans="T" if trans else "N")

    def solve(self, b, trans=False, rtol=1e-10, refine=3):
        """Solve with iterative refinement until ``|b - Ax| / |b| < rtol``.

        When refinement stalls above ``rtol`` the solution is still accepted
        if its normwise backward error ``|r| / (| |A||x| | + |b|)`` is below
        ``BACKWARD_TOL``: the residual then sits at the rounding floor of the
        matrix-vector product and no double-precision ``x`` does better.
        """
        try:
            return self._solve(b, trans, rtol, refine)
        except SolverError:
            if not self.fallback():
                raise
        return self._solve(b, trans, rtol, refine)

    def _solve(self, b, trans, rtol, refine):
        b = np.asarray(b, dtype=float)
        check_finite(b, "right-hand side")
        M = self.A.T if trans else self.A
        x = self._raw(b, trans)
        nb = np.linalg.norm(b)
        if nb == 0.0:
            return np.zeros_like(b)
        best, best_rel, best_r = None, np.inf, None
        for _ in range(refine + 1):
            if not np.all(np.isfinite(x)):
                raise SolverError("solution contains non-finite values (singular matrix?)")
            r = b - M @ x
            rel = np.linalg.norm(r) / nb
            if rel < best_rel:
                best, best_rel, best_r = x, rel, r
            if rel < rtol:
                return x
            x = x + self._raw(r, trans)
        berr = np.linalg.norm(best_r) / (np.linalg.norm(abs(M) @ np.abs(best)) + nb)
        if berr < BACKWARD_TOL:
            log.warning("relative residual %.3e above %.1e at rounding floor (backward error %.1e)",
                        best_rel, rtol, berr)
            return best
        raise SolverError(f"relative residual {best_rel:.3e} exceeds {rtol:.1e} "
                          f"(backward error {berr:.1e})")


def _equilibrate(A):
    """Row and column scalings (powers of two) giving unit max-norm rows and columns."""
    A = abs(sp.csr_matrix(A))
    rmax = A.max(axis=1).toarray().ravel()
    dr = np.exp2(-np.round(np.log2(np.where(rmax > 0, rmax, 1.0))))
    cmax = (sp.diags(dr) @ A).max(axis=0).toarray().ravel()
    dc = np.exp2(-np.round(np.log2(np.where(cmax > 0, cmax, 1.0))))
    return dr, dc


class CondensedFactorization:
    """LU of a matrix whose ``interior`` DoF groups only couple within a group.

    Each row of ``interior`` lists the DoFs of one group (typically the
    cell-interior DoFs of one cell). These blocks are inverted densely and
    the remaining skeleton Schur complement is factored sparsely, which
    roughly halves the size of a high-order system and cuts the fill.
    """

    def __init__(self, A, interior, backend=None):
        A = sp.csr_matrix(A)
        n = A.shape[0]
        check_finite(A, "matrix")
        self.A = A
        # power-of-two row/column equilibration: the interior blocks of solid
        # cells mix stiffness (~mu) and mass-like (~h^2) rows
        self.dr, self.dc = _equilibrate(A)
        A = (sp.diags(self.dr) @ A @ sp.diags(self.dc)).tocsr()
        interior = np.asarray(interior, dtype=np.int64)
        G, m = interior.shape
        I = interior.ravel()
        mask = np.ones(n, dtype=bool)
        mask[I] = False
        S = np.flatnonzero(mask)
        self.I, self.S, self.m = I, S, m
        A_II = A[I][:, I].tocoo()
        if np.any(A_II.row // m != A_II.col // m):
            raise ValueError("interior groups are coupled to each other")
        blocks = np.zeros((G, m, m))
        blocks[A_II.row // m, A_II.row % m, A_II.col % m] = A_II.data
        try:
            inv = np.linalg.inv(blocks)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular interior block: {exc}") from exc
        if not np.all(np.isfinite(inv)):
            raise SolverError("singular interior block")
        rows = np.repeat(np.arange(G * m), m)
        cols = ((np.arange(G * m) // m * m)[:, None] + np.arange(m)).ravel()
        self.inv = sp.csr_matrix((inv.ravel(), (rows, cols)), shape=(G * m, G * m))
        self.A_SI = A[S][:, I].tocsr()
        self.A_IS = A[I][:, S].tocsr()
        schur = (A[S][:, S] - self.A_SI @ (self.inv @ self.A_IS)).tocsc()
        self.schur = Factorization(schur, backend)
        self.backend = self.schur.backend

    def _raw(self, b, trans):
        I, S = self.I, self.S
        b = b * (self.dc if trans else self.dr)
        x = np.empty_like(b)
        if not trans:
            yI = self.inv @ b[I]
            xS = self.schur._raw(b[S] - self.A_SI @ yI, False)
            x[I] = self.inv @ (b[I] - self.A_IS @ xS)
        else:
            yI = self.inv.T @ b[I]
            xS = self.schur._raw(b[S] - self.A_IS.T @ yI, True)
            x[I] = self.inv.T @ (b[I] - self.A_SI.T @ xS)
        x[S] = xS
        return x * (self.dr if trans else self.dc)

    def fallback(self):
        ok = self.schur.fallback()
        self.backend = self.schur.backend
        return ok

    solve = Factorization.solve
    _solve = Factorization._solve


def direct_solve(A, b, rtol=1e-10, backend=None):
    """Solve ``A x = b`` by sparse LU; raises :class:`SolverError` on failure."""
    return Factorization(A, backend).solve(b, rtol=rtol)


def transpose_solve(A, b, rtol=1e-10, backend=None):
    """Solve ``A^T x = b`` reusing the factorization of ``A``."""
    return Factorization(A, backend).solve(b, trans=True, rtol=rtol)
