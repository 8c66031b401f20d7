"""Affine DoF constraints (hanging nodes and Dirichlet data).

A constraint set represents ``U = P @ U + g`` restricted to constrained rows,
stored as the full ``n x n`` matrix ``P`` (identity on free DoFs, master
weights on constrained rows, whose columns are always free) and the
inhomogeneity ``g``. Condensation of a linear system ``A x = b`` is then
``P^T A P + D`` with ``D`` a scaled identity on the constrained rows.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


class ConstraintSet:
    def __init__(self, n, lines=None, values=None):
        """``lines``: slave -> list of (master, weight); ``values``: slave -> inhomogeneity."""
        self.n = n
        lines = dict(lines or {})
        values = dict(values or {})
        self.lines, self.values = _flatten(lines, values)
        self._build()

    def _build(self):
        n = self.n
        constrained = np.zeros(n, dtype=bool)
        rows, cols, vals = [], [], []
        g = np.zeros(n)
        for s, masters in self.lines.items():
            constrained[s] = True
            g[s] = self.values.get(s, 0.0)
            for m, w in masters:
                rows.append(s)
                cols.append(m)
                vals.append(w)
        free = np.flatnonzero(~constrained)
        rows.extend(free.tolist())
        cols.extend(free.tolist())
        vals.extend([1.0] * len(free))
        self.P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        self.PT = self.P.T.tocsr()
        self.g = g
        self.constrained = constrained
        self.free = free

    def __len__(self):
        return len(self.lines)

    def homogeneous(self):
        new = object.__new__(ConstraintSet)
        new.n = self.n
        new.lines = self.lines
        new.values = {}
        new.P, new.PT = self.P, self.PT
        new.g = np.zeros(self.n)
        new.constrained, new.free = self.constrained, self.free
        return new

    def distribute(self, x):
        """Overwrite constrained entries of ``x`` from its free entries."""
        return self.P @ x + self.g

    def condense_vector(self, b):
        return self.PT @ b

    def condense_system(self, A, b=None):
        """Eliminate constraints from ``A x = b``.

        Returns the condensed matrix and right-hand side; the solution of the
        condensed system, passed through :meth:`distribute`, solves the
        constrained problem.
        """
        A = sp.csr_matrix(A)
        Ac = (self.PT @ A @ self.P).tocsr()
        Ac = Ac + sp.diags(self.constrained * self.diagonal_scale(A))
        if b is None:
            return Ac
        rhs = self.PT @ (b - A @ self.g)
        return Ac, rhs

    @staticmethod
    def diagonal_scale(A):
        d = np.abs(A.diagonal())
        d = d[d > 0]
        return float(d.mean()) if d.size else 1.0

    def merged(self, other):
        """Union with ``other``; entries of ``self`` win on overlap."""
        lines = dict(other.lines)
        values = dict(other.values)
        lines.update(self.lines)
        for s in self.lines:
            values.pop(s, None)
        values.update(self.values)
        return ConstraintSet(self.n, lines, values)


def _flatten(lines, values):
    """Resolve chains so that no master is itself constrained."""
    lines = {int(s): [(int(m), float(w)) for m, w in ms] for s, ms in lines.items()}
    values = {int(s): float(v) for s, v in values.items()}
    for s in lines:
        values.setdefault(s, 0.0)
    resolved = {}

    def resolve(s, stack):
        if s in resolved:
            return resolved[s]
        if s in stack:
            raise ValueError(f"cyclic constraint involving DoF {s}")
        stack.add(s)
        acc, val = {}, values[s]
        for m, w in lines[s]:
            if m in lines:
                sub, sv = resolve(m, stack)
                val += w * sv
                for mm, ww in sub:
                    acc[mm] = acc.get(mm, 0.0) + w * ww
            else:
                acc[m] = acc.get(m, 0.0) + w
        stack.discard(s)
        out = ([(m, w) for m, w in sorted(acc.items()) if w != 0.0], val)
        resolved[s] = out
        return out

    for s in lines:
        resolve(s, set())
    return ({s: resolved[s][0] for s in lines}, {s: resolved[s][1] for s in lines})


def build_constraints(space, dirichlet=()):
    """Hanging-node plus Dirichlet constraints on a :class:`MixedSpace`.

    ``dirichlet`` is a sequence of ``(boundary_id, field, func)`` where field
    is ``'v'``, ``'u'`` or ``'p'`` and ``func(x, y)`` returns one value per
    point for scalar fields or an ``(n, 2)`` array for vector fields
    (``func=None`` means zero). Where two entries claim a DoF the earlier
    one wins; disagreeing values are logged.
    """
    from .dofs import FIELDS

    lines, values = {}, {}
    for comp in range(5):
        h = space.handler(comp)
        off = int(space.offsets[comp])
        for s, ms in h.hanging.items():
            lines[s + off] = [(m + off, w) for m, w in ms]
    owner = {}
    conflicts = []
    for bid, fld, func in dirichlet:
        comps = FIELDS[fld]
        h = space.handler(comps[0])
        dofs = h.boundary_dofs([bid])
        if dofs.size == 0:
            continue
        pts = h.support_points[dofs]
        if func is None:
            vals = np.zeros((len(dofs), len(comps)))
        else:
            vals = np.asarray(func(pts[:, 0], pts[:, 1]), dtype=float).reshape(len(dofs), -1)
        for j, comp in enumerate(comps):
            off = int(space.offsets[comp])
            for d, val in zip(dofs, vals[:, j]):
                gd = int(d) + off
                if gd in owner:
                    if abs(values[gd] - val) > 1e-12 * max(1.0, abs(val)):
                        conflicts.append((gd, owner[gd], bid))
                    continue
                owner[gd] = bid
                lines[gd] = []
                values[gd] = float(val)
    for gd, first, second in conflicts:
        log.warning("DoF %d: Dirichlet data of boundary %d overrides boundary %d", gd, first, second)
    cs = ConstraintSet(space.n_dofs, lines, values)
    cs.conflicts = conflicts
    return cs


def scalar_constraints(handler):
    """Hanging constraints of a scalar space alone (no Dirichlet data)."""
    return ConstraintSet(handler.n_dofs, handler.hanging)


def distribute_local_to_global(K, f, dofs, constraints, rows, cols, vals, rhs):
    """Condense a local system into COO triplets and a global right-hand side.

    Equivalent to ``P^T K_glob P`` and ``P^T (f - K_glob g)`` restricted to the
    contribution of one cell. The unit diagonal of constrained rows is added
    once by :func:`finalize_constrained_diagonal`.
    """
    P, g = constraints.P, constraints.g
    expand = []
    for d in dofs:
        row = P.getrow(d)
        expand.append(list(zip(row.indices.tolist(), row.data.tolist())))
    K = np.asarray(K, dtype=float)
    f = np.asarray(f, dtype=float)
    gl = g[dofs]
    f_mod = f - K @ gl
    for a, ea in enumerate(expand):
        for ma, wa in ea:
            rhs[ma] += wa * f_mod[a]
            for b, eb in enumerate(expand):
                kab = K[a, b]
                if kab == 0.0:
                    continue
                for mb, wb in eb:
                    rows.append(ma)
                    cols.append(mb)
                    vals.append(wa * kab * wb)


def finalize_constrained_diagonal(A, constraints, scale=1.0):
    return sp.csr_matrix(A) + sp.diags(constraints.constrained * scale)
