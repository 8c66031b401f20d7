"""Coarse block-structured meshes for the channel-with-cylinder benchmarks.

The channel is cut by a tensor grid of x/y levels. The square box around the
cylinder is replaced by a ring of sectors between the box sides and the
circle; sectors facing a horizontal grid line through the box are split there,
so the beam of the FSI geometry meets the cylinder along straight lines.
"""
from __future__ import annotations

import math

from .mesh import FLUID, SOLID, BoundaryIds, CircleManifold, Mesh

CENTER = (0.2, 0.2)
RADIUS = 0.05
HEIGHT = 0.41
BEAM = (0.6, 0.19, 0.21)  # tip x, bottom y, top y


def _block_mesh(length, xs, ys, box, beam, ids):
    """Assemble cells from the grid ``xs x ys`` with the ring in ``box``."""
    (bx0, bx1), (by0, by1) = box
    cx, cy = CENTER
    verts, index = [], {}

    def vid(p):
        key = (round(p[0], 12), round(p[1], 12))
        if key not in index:
            index[key] = len(verts)
            verts.append((float(p[0]), float(p[1])))
        return index[key]

    def on_circle(theta):
        return (cx + RADIUS * math.cos(theta), cy + RADIUS * math.sin(theta))

    def angle_at(y, left):
        a = math.asin((y - cy) / RADIUS)
        return math.pi - a if left else a

    cells, mats, arcs = [], [], []

    def in_beam(x0, x1, y0, y1):
        return beam is not None and x0 >= bx1 - 1e-12 and x1 <= beam[0] + 1e-12 \
            and y0 >= beam[1] - 1e-12 and y1 <= beam[2] + 1e-12

    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            x0, x1, y0, y1 = xs[i], xs[i + 1], ys[j], ys[j + 1]
            if x0 >= bx0 and x1 <= bx1 and y0 >= by0 and y1 <= by1:
                continue
            cells.append([vid((x0, y0)), vid((x1, y0)), vid((x1, y1)), vid((x0, y1))])
            mats.append(SOLID if in_beam(x0, x1, y0, y1) else FLUID)

    inner_ys = [y for y in ys if by0 < y < by1]

    def sector(pa, pb, ta, tb, mat):
        # corners: circle(ta), box a, box b, circle(tb); face 3 is the arc
        ca, cb = vid(on_circle(ta)), vid(on_circle(tb))
        cells.append([ca, vid(pa), vid(pb), cb])
        mats.append(mat)
        arcs.append((ca, cb, mat))

    q = math.pi / 4
    # right side, bottom to top
    pts = [(bx1, by0)] + [(bx1, y) for y in inner_ys] + [(bx1, by1)]
    ang = [-q] + [angle_at(y, False) for y in inner_ys] + [q]
    for k in range(len(pts) - 1):
        solid = beam is not None and abs(pts[k][1] - beam[1]) < 1e-12 and abs(pts[k + 1][1] - beam[2]) < 1e-12
        sector(pts[k], pts[k + 1], ang[k], ang[k + 1], SOLID if solid else FLUID)
    sector((bx1, by1), (bx0, by1), q, 3 * q, FLUID)
    # left side, top to bottom
    pts = [(bx0, by1)] + [(bx0, y) for y in reversed(inner_ys)] + [(bx0, by0)]
    ang = [3 * q] + [angle_at(y, True) for y in reversed(inner_ys)] + [5 * q]
    for k in range(len(pts) - 1):
        sector(pts[k], pts[k + 1], ang[k], ang[k + 1], FLUID)
    sector((bx0, by0), (bx1, by0), 5 * q, 7 * q, FLUID)

    bfaces = []
    seen = {}
    for c in cells:
        for a, b in ((c[0], c[1]), (c[1], c[2]), (c[3], c[2]), (c[0], c[3])):
            key = (min(a, b), max(a, b))
            seen[key] = seen.get(key, 0) + 1
    arc_keys = {(min(a, b), max(a, b)): mat for a, b, mat in arcs}
    for (a, b), cnt in sorted(seen.items()):
        if cnt != 1:
            continue
        pa, pb = verts[a], verts[b]
        if (a, b) in arc_keys:
            bid = ids.cylinder[1] if arc_keys[(a, b)] == SOLID else ids.cylinder[0]
        elif abs(pa[0]) < 1e-12 and abs(pb[0]) < 1e-12:
            bid = ids.inflow
        elif abs(pa[0] - length) < 1e-12 and abs(pb[0] - length) < 1e-12:
            bid = ids.outflow
        else:
            bid = ids.wall
        bfaces.append((a, b, bid))
    circle = CircleManifold(CENTER, RADIUS)
    manifolds = {k: circle for k in ids.cylinder}
    return Mesh.from_arrays(verts, cells, mats, bfaces, manifolds)


def fsi1_mesh(ids=None):
    """Channel [0, 2.5] x [0, 0.41] with cylinder and elastic beam (tip at x = 0.6)."""
    xs = [0.0, 0.1, 0.3, 0.4, 0.5, 0.6, 0.9, 1.3, 1.8, 2.5]
    ys = [0.0, 0.1, BEAM[1], BEAM[2], 0.3, HEIGHT]
    return _block_mesh(2.5, xs, ys, ((0.1, 0.3), (0.1, 0.3)), BEAM, ids or BoundaryIds())


def flow2d1_mesh(ids=None):
    """Channel [0, 2.2] x [0, 0.41] with the rigid cylinder only."""
    xs = [0.0, 0.1, 0.3, 0.6, 0.9, 1.3, 1.8, 2.2]
    ys = [0.0, 0.1, 0.3, HEIGHT]
    return _block_mesh(2.2, xs, ys, ((0.1, 0.3), (0.1, 0.3)), None, ids or BoundaryIds())


def cylinder_manifolds(ids=None):
    ids = ids or BoundaryIds()
    circle = CircleManifold(CENTER, RADIUS)
    return {k: circle for k in ids.cylinder}
