"""Adaptive solve-estimate-mark-refine loop, configuration and file output."""
from __future__ import annotations

import configparser
import logging
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .dwr import PartitionOfUnity, adjoint_problem, compute_indicators, mark_cells, solve_adjoint
from .fsi_model import FsiParameters, FsiProblem, solve
from .goals import GoalSpec, displacement_at, evaluate_goal, format_value, pressure_at
from .mesh import BoundaryIds, read_ucd, refine, refine_global
from .meshgen import cylinder_manifolds

log = logging.getLogger(__name__)

HEADER = ("Dofs", "True err", "Est err", "Est ind", "Eff", "Ind")
COL_FIRST, COL = 8, 13


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(t) for t in text.replace(",", " ").split())


@dataclass
class RunConfig:
    name: str = "custom"
    mesh_file: Optional[str] = None
    params: FsiParameters = field(default_factory=FsiParameters)
    mean_velocity: float = 0.2
    channel_height: float = 0.41
    ids: BoundaryIds = field(default_factory=BoundaryIds)
    goal: GoalSpec = field(default_factory=GoalSpec)
    lift: Optional[GoalSpec] = None
    reference: Optional[float] = None
    tol: float = 0.0
    alpha: float = 1.0
    marking: str = "pu-threshold"
    fraction: float = 0.3
    max_loops: int = 4
    max_dofs: int = 10**6
    initial_refinements: int = 0
    output: str = "runs"
    write_vtk: bool = True
    displacement_point: Optional[tuple] = None
    pressure_front: Optional[tuple] = None
    pressure_back: Optional[tuple] = None

    def __post_init__(self):
        if not self.tol >= 0.0:
            raise ValueError("tol must be non-negative")
        if self.max_loops < 1:
            raise ValueError("max_loops must be >= 1")
        if self.marking not in ("pu-threshold", "dof-fraction"):
            raise ValueError(f"unknown marking strategy {self.marking!r}")

    @classmethod
    def from_file(cls, path):
        """Read an INI-style config. ``path`` may also name a shipped preset."""
        path = resolve_config(path)
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        with open(path) as fh:
            cp.read_file(fh)
        return cls.from_parser(cp, base=Path(path).parent)

    @classmethod
    def from_parser(cls, cp, base=Path(".")):
        run = cp["run"] if cp.has_section("run") else {}
        phys = cp["physics"] if cp.has_section("physics") else {}
        bnd = cp["boundary"] if cp.has_section("boundary") else {}
        goal = cp["goal"] if cp.has_section("goal") else {}
        pts = cp["points"] if cp.has_section("points") else {}
        ids = BoundaryIds(inflow=int(bnd.get("inflow", 0)), outflow=int(bnd.get("outflow", 1)),
                          wall=int(bnd.get("wall", 2)), cylinder=_ints(bnd.get("cylinder", "80 81")))
        defaults = FsiParameters()
        params = FsiParameters(**{k: float(phys.get(k, getattr(defaults, k)))
                                  for k in ("rho_f", "nu_f", "rho_s", "mu_s", "lambda_s",
                                            "alpha_u", "alpha_p")})
        scale = float(goal.get("scale", 1.0))
        gids = _ints(goal.get("ids", " ".join(map(str, ids.cylinder))))
        interface = goal.get("include_interface", "true").strip().lower() in ("1", "true", "yes", "on")
        spec = GoalSpec(ids=gids, include_interface=interface,
                        direction=_floats(goal.get("direction", "1 0")), scale=scale,
                        name=goal.get("name", "drag"))
        lift = GoalSpec(ids=gids, include_interface=interface, direction=(0.0, 1.0), scale=scale,
                        name="lift")
        ref = goal.get("reference", "").strip()
        mesh = run.get("mesh", "").strip() or None
        if mesh and not os.path.isabs(mesh):
            mesh = str(Path(base) / mesh)

        def point(key):
            txt = pts.get(key, "").strip()
            return _floats(txt) if txt else None

        return cls(
            name=run.get("preset", "custom"), mesh_file=mesh, params=params,
            mean_velocity=float(cp.get("inflow", "mean_velocity", fallback="0.2")),
            channel_height=float(cp.get("inflow", "height", fallback="0.41")),
            ids=ids, goal=spec, lift=lift, reference=float(ref) if ref else None,
            tol=float(run.get("tol", 0.0)), alpha=float(run.get("alpha", 1.0)),
            marking=run.get("marking", "pu-threshold"), fraction=float(run.get("fraction", 0.3)),
            max_loops=int(run.get("max_loops", 4)), max_dofs=int(run.get("max_dofs", 10**6)),
            initial_refinements=int(run.get("initial_refinements", 0)),
            output=run.get("output", "runs"),
            write_vtk=run.get("write_vtk", "true").strip().lower() in ("1", "true", "yes", "on"),
            displacement_point=point("displacement"), pressure_front=point("pressure_front"),
            pressure_back=point("pressure_back"))

    def inflow(self, x, y):
        """Parabolic profile with the configured mean velocity."""
        H = self.channel_height
        vx = 1.5 * self.mean_velocity * 4.0 * y * (H - y) / H**2
        return np.column_stack([vx, np.zeros_like(y)])

    def dirichlet(self):
        """Boundary data in priority order: no-slip parts first, then the inflow."""
        ids = self.ids
        out = [(ids.wall, "v", None)] + [(c, "v", None) for c in ids.cylinder]
        out.append((ids.inflow, "v", self.inflow))
        for b in (ids.inflow, ids.outflow, ids.wall, *ids.cylinder):
            out.append((b, "u", None))
        return out

    def load_mesh(self):
        if self.mesh_file is None:
            raise ValueError("no mesh file configured")
        with open(self.mesh_file) as fh:
            mesh = read_ucd(fh.read(), cylinder_manifolds(self.ids))
        return refine_global(mesh, self.initial_refinements)


def resolve_config(name):
    """Path of a config file; bare preset names map to the shipped presets."""
    if os.path.exists(name):
        return str(name)
    stem = name[:-4] if name.endswith(".cfg") else name
    ref = resources.files("fsidwr") / "data" / f"{stem}.cfg"
    if ref.is_file():
        return str(ref)
    raise FileNotFoundError(f"config {name!r} not found")


@dataclass
class LoopRecord:
    """One row of the results table plus bookkeeping.

    ``true_error`` and ``est_error`` are magnitudes; ``eta`` keeps the sign of
    the summed indicators and ``weighted_residual`` the unlocalized value.
    """

    loop: int
    dofs: int
    goal: float
    true_error: Optional[float]
    est_error: float
    est_indicator: float
    effectivity: Optional[float]
    indicator_index: Optional[float]
    newton_iterations: int
    wall_time: float
    weighted_residual: float = 0.0
    eta: float = 0.0
    quantities: dict = field(default_factory=dict)


def _cell(x, width):
    return (" " * width) if x is None else f"{x:<{width}.2e}"


def write_results_table(records, path):
    """Fixed-width table; empty cells are left blank."""
    lines = [(f"{HEADER[0]:<{COL_FIRST}}" + "".join(f"{h:<{COL}}" for h in HEADER[1:])).rstrip()]
    for r in records:
        vals = (r.true_error, r.est_error, r.est_indicator, r.effectivity, r.indicator_index)
        lines.append((f"{r.dofs:<{COL_FIRST}d}" + "".join(_cell(v, COL) for v in vals)).rstrip())
    Path(path).write_text("\n".join(lines) + "\n")


def read_results_table(path):
    rows = []
    for ln in Path(path).read_text().splitlines()[1:]:
        if not ln.strip():
            continue
        ln = ln.ljust(COL_FIRST + 5 * COL)
        row = [int(ln[:COL_FIRST])]
        for k in range(5):
            cell = ln[COL_FIRST + k * COL:COL_FIRST + (k + 1) * COL].strip()
            row.append(float(cell) if cell else None)
        rows.append(tuple(row))
    return rows


def write_vtk(mesh, space, U, path, adjoint_space=None, z=None, cell_indicators=None):
    """Legacy ASCII VTK unstructured grid of the active cells."""
    verts = mesh.used_vertices()
    num = {v: i for i, v in enumerate(verts)}
    pts = mesh.points[verts]
    cells = mesh.active_cells

    def nodal(sp_, X, comp):
        h = sp_.handler(comp)
        return np.array([X[sp_.offsets[comp] + h.vertex_dof[v]] for v in verts])

    out = ["# vtk DataFile Version 3.0", "fsidwr solution", "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {len(verts)} double"]
    out += [f"{x:.17g} {y:.17g} 0" for x, y in pts]
    out.append(f"CELLS {len(cells)} {5 * len(cells)}")
    out += ["4 " + " ".join(str(num[v]) for v in mesh.cell_vertices[c]) for c in cells]
    out.append(f"CELL_TYPES {len(cells)}")
    out += ["9"] * len(cells)
    out.append(f"POINT_DATA {len(verts)}")

    def vector(name, a, b):
        out.append(f"VECTORS {name} double")
        out.extend(f"{x:.17g} {y:.17g} 0" for x, y in zip(a, b))

    def scalar(name, a):
        out.append(f"SCALARS {name} double 1")
        out.append("LOOKUP_TABLE default")
        out.extend(f"{x:.17g}" for x in a)

    vector("velocity", nodal(space, U, 0), nodal(space, U, 1))
    vector("displacement", nodal(space, U, 2), nodal(space, U, 3))
    scalar("pressure", nodal(space, U, 4))
    if z is not None:
        vector("adjoint_velocity", nodal(adjoint_space, z, 0), nodal(adjoint_space, z, 1))
        vector("adjoint_displacement", nodal(adjoint_space, z, 2), nodal(adjoint_space, z, 3))
        scalar("adjoint_pressure", nodal(adjoint_space, z, 4))
    out.append(f"CELL_DATA {len(cells)}")
    out.append("SCALARS material int 1")
    out.append("LOOKUP_TABLE default")
    out.extend(str(mesh.cell_material[c]) for c in cells)
    if cell_indicators is not None:
        scalar("error_indicator", cell_indicators)
    Path(path).write_text("\n".join(out) + "\n")


def point_quantities(cfg, space, U):
    q = {}
    if cfg.displacement_point is not None:
        d = displacement_at(space, U, cfg.displacement_point)
        q["DisX"], q["DisY"] = float(d[0]), float(d[1])
    if cfg.pressure_front is not None:
        front = pressure_at(space, U, cfg.pressure_front)
        back = pressure_at(space, U, cfg.pressure_back) if cfg.pressure_back is not None else None
        q["P-Diff"] = front - (back or 0.0)
        q["P-front"] = front
        if back is not None:
            q["P-back"] = back
    return q


SUMMARY_KEYS = ("DisX", "DisY", "P-Diff", "P-front", "P-back")


def format_summary(q):
    lines = [f"{(k + ':'):<8}    {format_value(q[k])}" for k in SUMMARY_KEYS if k in q]
    lines.append("------------------")
    lines.append(f"Face drag:      {format_value(q['Face drag'])}")
    if "Face lift" in q:
        lines.append(f"Face lift:      {format_value(q['Face lift'])}")
    return "\n".join(lines)


def run_adaptive(cfg, mesh=None, echo=print):
    """Run the adaptive loop; returns the list of :class:`LoopRecord`.

    Writes ``dwr_results.txt`` after every loop (so a failure keeps the rows
    computed so far) and, if enabled, one VTK file per loop.
    """
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    mesh = mesh if mesh is not None else cfg.load_mesh()
    records = []
    table = out / "dwr_results.txt"
    write_results_table(records, table)
    for loop in range(1, cfg.max_loops + 1):
        t0 = time.perf_counter()
        primal = FsiProblem(mesh, cfg.params, cfg.dirichlet(), outflow_ids=(cfg.ids.outflow,))
        res = solve(primal)
        U = res.U
        J = evaluate_goal(primal.space, U, cfg.params, cfg.goal)
        adj = adjoint_problem(primal)
        z = solve_adjoint(adj, primal.space, U, cfg.params, cfg.goal).z
        pu = PartitionOfUnity(mesh)
        est = compute_indicators(adj, primal.space, U, z, pu=pu, reference=cfg.reference, goal_value=J)
        q = point_quantities(cfg, primal.space, U)
        q["Face drag"] = J
        if cfg.lift is not None:
            q["Face lift"] = evaluate_goal(primal.space, U, cfg.params, cfg.lift)
        true = None if est.true_error is None else abs(est.true_error)
        rec = LoopRecord(loop, primal.n_dofs, J, true, abs(est.eta), est.eta_abs, est.effectivity,
                         est.indicator_index, res.iterations, time.perf_counter() - t0,
                         est.weighted_residual, est.eta, q)
        records.append(rec)
        write_results_table(records, table)
        if cfg.write_vtk:
            write_vtk(mesh, primal.space, U, out / f"solution-{loop:02d}.vtk", adj.space, z,
                      est.cell_indicators)
        echo(f"loop {loop}: dofs {rec.dofs}  J {J:.10e}  eta {est.eta:.3e}  "
             f"sum|eta_i| {est.eta_abs:.3e}  newton {res.iterations}  {rec.wall_time:.1f}s")
        if abs(est.eta) <= cfg.tol or loop == cfg.max_loops or primal.n_dofs >= cfg.max_dofs:
            break
        rows = mark_cells(est, mesh.n_active_cells, cfg.alpha, cfg.marking, cfg.fraction)
        mesh = refine(mesh, [int(primal.space.cells[r]) for r in rows])
    echo(format_summary(records[-1].quantities))
    return records
