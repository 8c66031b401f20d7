"""Hierarchical quadrilateral meshes with 1-irregular isotropic refinement.

Cells are stored with counter-clockwise vertex order ``v0..v3`` mapped to the
reference corners ``(0,0), (1,0), (1,1), (0,1)``. Local faces are

* face 0: ``v0 -> v1`` (eta = 0)
* face 1: ``v1 -> v2`` (xi = 1)
* face 2: ``v3 -> v2`` (eta = 1)
* face 3: ``v0 -> v3`` (xi = 0)

Refined cells stay in the cell table (inactive) so that cell ids are stable
across refinement passes.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

FLUID = 0
SOLID = 1

# local face -> (local start vertex, local end vertex)
FACE_VERTICES = ((0, 1), (1, 2), (3, 2), (0, 3))


class MeshFormatError(ValueError):
    """Raised for malformed mesh input; carries the offending line number."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class BoundaryIds:
    inflow: int = 0
    outflow: int = 1
    wall: int = 2
    cylinder: tuple = (80, 81)

    def __post_init__(self):
        ids = [self.inflow, self.outflow, self.wall, *self.cylinder]
        if len(set(ids)) != len(ids):
            raise ValueError(f"boundary ids must be pairwise distinct, got {ids}")


@dataclass(frozen=True)
class CircleManifold:
    center: tuple
    radius: float

    def project(self, p):
        cx, cy = self.center
        dx, dy = p[0] - cx, p[1] - cy
        s = self.radius / math.hypot(dx, dy)
        return (cx + s * dx, cy + s * dy)

    def angle(self, p):
        return math.atan2(p[1] - self.center[1], p[0] - self.center[0])

    def arc_midpoint(self, a, b):
        """Midpoint by angle bisection of the shorter arc from a to b."""
        ta, tb = self.angle(a), self.angle(b)
        d = _wrap_angle(tb - ta)
        t = ta + 0.5 * d
        return (self.center[0] + self.radius * math.cos(t),
                self.center[1] + self.radius * math.sin(t))


def _wrap_angle(d):
    while d <= -math.pi:
        d += 2.0 * math.pi
    while d > math.pi:
        d -= 2.0 * math.pi
    return d


@dataclass
class Mesh:
    vertices: list
    cell_vertices: list
    cell_material: list
    cell_level: list = field(default_factory=list)
    cell_parent: list = field(default_factory=list)
    cell_children: list = field(default_factory=list)
    cell_edges: list = field(default_factory=list)
    edge_vertices: list = field(default_factory=list)
    edge_children: list = field(default_factory=list)
    edge_mid: list = field(default_factory=list)
    edge_parent: list = field(default_factory=list)
    edge_boundary: list = field(default_factory=list)
    manifolds: dict = field(default_factory=dict)
    generation: int = 0

    @classmethod
    def from_arrays(cls, vertices, cells, materials, boundary_faces, manifolds=None):
        """Build a level-0 mesh.

        ``boundary_faces`` is an iterable of ``(a, b, boundary_id)``. Vertices on
        faces whose id carries a manifold are snapped onto it.
        """
        mesh = cls(vertices=[tuple(map(float, v[:2])) for v in vertices],
                   cell_vertices=[], cell_material=[], manifolds=dict(manifolds or {}))
        lookup = {}
        for c, mat in zip(cells, materials):
            c = tuple(int(i) for i in c)
            edges = []
            for (i, j) in FACE_VERTICES:
                a, b = c[i], c[j]
                key = (min(a, b), max(a, b))
                if key not in lookup:
                    lookup[key] = mesh._new_edge(a, b)
                edges.append(lookup[key])
            mesh.cell_vertices.append(c)
            mesh.cell_material.append(int(mat))
            mesh.cell_level.append(0)
            mesh.cell_parent.append(-1)
            mesh.cell_children.append(None)
            mesh.cell_edges.append(edges)
        for a, b, bid in boundary_faces:
            key = (min(a, b), max(a, b))
            if key not in lookup:
                raise MeshFormatError(f"boundary face ({a}, {b}) is not a cell face")
            mesh.edge_boundary[lookup[key]] = int(bid)
        for e, bid in enumerate(mesh.edge_boundary):
            man = mesh.manifolds.get(bid)
            if man is not None:
                for v in mesh.edge_vertices[e]:
                    mesh.vertices[v] = man.project(mesh.vertices[v])
        return mesh

    # -- construction helpers -------------------------------------------------

    def _new_edge(self, a, b, parent=-1, boundary=-1):
        self.edge_vertices.append((a, b))
        self.edge_children.append(None)
        self.edge_mid.append(-1)
        self.edge_parent.append(parent)
        self.edge_boundary.append(boundary)
        return len(self.edge_vertices) - 1

    def _edge_lookup(self):
        if getattr(self, "_lookup", None) is None:
            self._lookup = {(min(a, b), max(a, b)): e for e, (a, b) in enumerate(self.edge_vertices)}
        return self._lookup

    def _get_edge(self, a, b):
        lookup = self._edge_lookup()
        key = (min(a, b), max(a, b))
        if key not in lookup:
            lookup[key] = self._new_edge(a, b)
        return lookup[key]

    def _split_edge(self, e):
        if self.edge_children[e] is not None:
            return self.edge_mid[e]
        a, b = self.edge_vertices[e]
        pa, pb = self.vertices[a], self.vertices[b]
        man = self.manifolds.get(self.edge_boundary[e])
        if man is not None:
            mid = man.arc_midpoint(pa, pb)
        else:
            mid = (0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]))
        self.vertices.append(mid)
        m = len(self.vertices) - 1
        lookup = self._edge_lookup()
        kids = []
        for (s, t) in ((a, m), (m, b)):
            c = self._new_edge(s, t, parent=e, boundary=self.edge_boundary[e])
            lookup[(min(s, t), max(s, t))] = c
            kids.append(c)
        self.edge_children[e] = tuple(kids)
        self.edge_mid[e] = m
        return m

    def _refine_cell(self, c):
        from .fem.geometry import CellGeometry

        v = self.cell_vertices[c]
        mids = [self._split_edge(e) for e in self.cell_edges[c]]
        center = CellGeometry(self, [c]).map_points(np.array([[0.5, 0.5]]))[0][0, 0]
        self.vertices.append((float(center[0]), float(center[1])))
        C = len(self.vertices) - 1
        m0, m1, m2, m3 = mids
        quads = ((v[0], m0, C, m3), (m0, v[1], m1, C), (C, m1, v[2], m2), (m3, C, m2, v[3]))
        kids = []
        for q in quads:
            edges = [self._get_edge(q[i], q[j]) for (i, j) in FACE_VERTICES]
            self.cell_vertices.append(q)
            self.cell_material.append(self.cell_material[c])
            self.cell_level.append(self.cell_level[c] + 1)
            self.cell_parent.append(c)
            self.cell_children.append(None)
            self.cell_edges.append(edges)
            kids.append(len(self.cell_vertices) - 1)
        self.cell_children[c] = tuple(kids)

    # -- queries --------------------------------------------------------------

    @property
    def n_cells(self):
        return len(self.cell_vertices)

    @property
    def points(self):
        return np.asarray(self.vertices, dtype=float)

    @property
    def active_cells(self):
        cached = getattr(self, "_active", None)
        if cached is None:
            cached = [c for c in range(self.n_cells) if self.cell_children[c] is None]
            self._active = cached
        return cached

    @property
    def n_active_cells(self):
        return len(self.active_cells)

    def _edge_users(self):
        """edge id -> list of (active cell, local face)."""
        cached = getattr(self, "_users", None)
        if cached is None:
            cached = {}
            for c in self.active_cells:
                for f, e in enumerate(self.cell_edges[c]):
                    cached.setdefault(e, []).append((c, f))
            self._users = cached
        return cached

    def face_neighbors(self, c, f):
        """Active cells across local face ``f`` of active cell ``c``.

        Returns a list of ``(cell, local face)``; empty on the boundary. The list
        has two entries when the neighbor side is finer.
        """
        users = self._edge_users()
        e = self.cell_edges[c][f]
        same = [(k, g) for (k, g) in users.get(e, []) if k != c]
        if same:
            return same
        kids = self.edge_children[e]
        if kids is not None:
            out = []
            for ke in kids:
                out.extend(users.get(ke, []))
            return out
        pe = self.edge_parent[e]
        if pe >= 0 and pe in users:
            return list(users[pe])
        return []

    def boundary_faces(self, ids=None):
        """(cell, local face, boundary id) for active boundary faces."""
        out = []
        for c in self.active_cells:
            for f, e in enumerate(self.cell_edges[c]):
                bid = self.edge_boundary[e]
                if bid >= 0 and (ids is None or bid in ids):
                    out.append((c, f, bid))
        return out

    def used_vertices(self):
        return sorted({v for c in self.active_cells for v in self.cell_vertices[c]})

    def copy(self):
        new = copy.deepcopy(self)
        for attr in ("_lookup", "_active", "_users"):
            if hasattr(new, attr):
                delattr(new, attr)
        return new

    def _invalidate(self):
        self._active = None
        self._users = None


def interface_faces(mesh):
    """Faces separating fluid from solid cells, reported once from the fluid side."""
    out = []
    for c in mesh.active_cells:
        if mesh.cell_material[c] != FLUID:
            continue
        for f in range(4):
            if any(mesh.cell_material[k] == SOLID for k, _ in mesh.face_neighbors(c, f)):
                out.append((c, f))
    return out


def refine(mesh, marks):
    """Return a new mesh with the marked active cells split into four.

    Neighbors are refined as needed so that no face carries more than one
    hanging vertex.
    """
    marks = set(marks)
    active = set(mesh.active_cells)
    bad = marks - active
    if bad:
        raise ValueError(f"cannot refine inactive cells {sorted(bad)[:5]}")
    if not marks:
        return mesh
    users = mesh._edge_users()
    todo = set(marks)
    stack = list(todo)
    while stack:
        c = stack.pop()
        for e in mesh.cell_edges[c]:
            pe = mesh.edge_parent[e]
            if pe < 0:
                continue
            for k, _ in users.get(pe, []):
                if k not in todo:
                    todo.add(k)
                    stack.append(k)
    new = mesh.copy()
    for c in sorted(todo, key=lambda c: (mesh.cell_level[c], c)):
        new._refine_cell(c)
    new._invalidate()
    new.generation = mesh.generation + 1
    return new


def refine_global(mesh, times=1):
    for _ in range(times):
        mesh = refine(mesh, mesh.active_cells)
    return mesh


def is_one_irregular(mesh):
    """True if no used edge has a used descendant two or more levels down."""
    users = mesh._edge_users()

    def deep_used(e, depth):
        kids = mesh.edge_children[e]
        if kids is None:
            return False
        for k in kids:
            if depth >= 1 and k in users:
                return True
            if deep_used(k, depth + 1):
                return True
        return False

    return not any(deep_used(e, 0) for e in users)


# -- AVS UCD I/O --------------------------------------------------------------

def read_ucd(text, manifolds=None):
    """Parse an ASCII AVS-UCD mesh with ``quad`` cells and ``line`` boundary faces."""
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(n, ln) for n, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise MeshFormatError("empty mesh file")
    n0, head = lines[0]
    try:
        parts = head.split()
        n_nodes, n_cells = int(parts[0]), int(parts[1])
    except (ValueError, IndexError):
        raise MeshFormatError("malformed header, expected '<nodes> <cells> ...'", n0) from None
    if len(lines) < 1 + n_nodes + n_cells:
        raise MeshFormatError("file ends before all nodes and cells were read", lines[-1][0])
    index, verts = {}, []
    for n, ln in lines[1:1 + n_nodes]:
        parts = ln.split()
        try:
            nid = int(parts[0])
            x, y = float(parts[1]), float(parts[2])
        except (ValueError, IndexError):
            raise MeshFormatError("malformed vertex line", n) from None
        if nid in index:
            raise MeshFormatError(f"duplicate vertex id {nid}", n)
        index[nid] = len(verts)
        verts.append((x, y))
    cells, mats, bfaces = [], [], []
    for n, ln in lines[1 + n_nodes:1 + n_nodes + n_cells]:
        parts = ln.split()
        if len(parts) < 3:
            raise MeshFormatError("malformed cell line", n)
        kind = parts[2]
        try:
            mat = int(parts[1])
            ids = [int(p) for p in parts[3:]]
        except ValueError:
            raise MeshFormatError("malformed cell line", n) from None
        for vid in ids:
            if vid not in index:
                raise MeshFormatError(f"cell references unknown vertex {vid}", n)
        vs = [index[v] for v in ids]
        if kind == "quad":
            if len(vs) != 4:
                raise MeshFormatError("quad cell needs 4 vertices", n)
            if not _positive_quad([verts[v] for v in vs]):
                raise MeshFormatError("inverted or degenerate quad cell", n)
            cells.append(vs)
            mats.append(mat)
        elif kind == "line":
            if len(vs) != 2:
                raise MeshFormatError("line face needs 2 vertices", n)
            bfaces.append((vs[0], vs[1], mat))
        else:
            raise MeshFormatError(f"unsupported cell type '{kind}' (only quad/line)", n)
    if any(m not in (FLUID, SOLID) for m in mats):
        raise MeshFormatError(f"material ids must be 0 or 1, got {sorted(set(mats))}")
    return Mesh.from_arrays(verts, cells, mats, bfaces, manifolds)


def _positive_quad(p):
    """Positive corner Jacobians of the bilinear map (convex, counter-clockwise)."""
    for i in range(4):
        a, b, c = p[i - 1], p[i], p[(i + 1) % 4]
        cross = (c[0] - b[0]) * (a[1] - b[1]) - (c[1] - b[1]) * (a[0] - b[0])
        if cross <= 0.0:
            return False
    return True


def write_ucd(mesh):
    """Serialize the active cells and boundary faces of ``mesh`` to AVS-UCD text."""
    used = mesh.used_vertices()
    num = {v: i + 1 for i, v in enumerate(used)}
    bfaces = mesh.boundary_faces()
    out = [f"{len(used)} {mesh.n_active_cells + len(bfaces)} 0 0 0"]
    for v in used:
        x, y = mesh.vertices[v]
        out.append(f"{num[v]} {x!r} {y!r} 0")
    k = 1
    for c in mesh.active_cells:
        vs = " ".join(str(num[v]) for v in mesh.cell_vertices[c])
        out.append(f"{k} {mesh.cell_material[c]} quad {vs}")
        k += 1
    for c, f, bid in bfaces:
        i, j = FACE_VERTICES[f]
        a, b = mesh.cell_vertices[c][i], mesh.cell_vertices[c][j]
        out.append(f"{k} {bid} line {num[a]} {num[b]}")
        k += 1
    return "\n".join(out) + "\n"


def rectangle_mesh(x0, x1, y0, y1, nx, ny, ids=(3, 1, 2, 0), material=FLUID):
    """Structured ``nx`` x ``ny`` mesh of a rectangle.

    ``ids`` gives boundary ids for (bottom, right, top, left).
    """
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    verts = [(x, y) for y in ys for x in xs]

    def vid(i, j):
        return j * (nx + 1) + i

    cells = [(vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1))
             for j in range(ny) for i in range(nx)]
    bf = []
    for i in range(nx):
        bf.append((vid(i, 0), vid(i + 1, 0), ids[0]))
        bf.append((vid(i, ny), vid(i + 1, ny), ids[2]))
    for j in range(ny):
        bf.append((vid(nx, j), vid(nx, j + 1), ids[1]))
        bf.append((vid(0, j), vid(0, j + 1), ids[3]))
    mats = material if np.ndim(material) else [material] * len(cells)
    return Mesh.from_arrays(verts, cells, mats, bf)
