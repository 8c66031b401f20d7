import numpy as np
import pytest

from checks import channel_mesh, eulerian_solution_errors, jacobian_fd_errors, quadratic_order, random_state
from fsidwr.fem import gauss_square
from fsidwr.fem.values import Basis, jets
from fsidwr.fsi_model import FsiProblem, NewtonError, newton_solve, solve
from fsidwr.goals import displacement_at
from fsidwr.mesh import FLUID, SOLID, interface_faces, rectangle_mesh, refine
from fsidwr.physics import FsiParameters, Kinematics
from oracles import EulerianNS, svk_energy


def zero_bc(mesh):
    ids = sorted({b for _, _, b in mesh.boundary_faces()})
    return [(b, f, None) for b in ids for f in ("v", "u")]


def partly_refined(mesh, n=12):
    return refine(mesh, mesh.active_cells[:n])


# -- residual -----------------------------------------------------------------

def test_zero_state_has_zero_residual(fsi1_cfg, fsi1_coarse):
    problem = FsiProblem(fsi1_coarse, fsi1_cfg.params, zero_bc(fsi1_coarse))
    assert np.abs(problem.residual(np.zeros(problem.n_dofs))).max() == 0.0


def test_residual_vanishes_on_constrained_rows(fsi1_cfg, fsi1_coarse, rng):
    problem = FsiProblem(partly_refined(fsi1_coarse), fsi1_cfg.params, fsi1_cfg.dirichlet())
    r = problem.residual(random_state(problem, rng))
    assert np.abs(r[problem.hom.constrained]).max() == 0.0


@pytest.mark.parametrize("refined", [False, True])
def test_identity_map_residual_matches_eulerian_assembly(flow_cfg, flow_coarse, rng, refined):
    mesh = partly_refined(flow_coarse) if refined else flow_coarse
    prm = FsiParameters(rho_f=1.0, nu_f=0.01)
    problem = FsiProblem(mesh, prm)
    space = problem.space
    nv = space.hv.n_dofs
    U = np.zeros(space.n_dofs)
    U[:2 * nv] = rng.standard_normal(2 * nv)
    U[space.component_slice(4)] = rng.standard_normal(space.hp.n_dofs)
    r_main, r_mesh, _, _ = problem.assemble(U)
    oracle = EulerianNS(mesh, space.hv, space.hp, prm.rho_f, prm.nu_f)
    X = np.r_[U[:2 * nv], U[space.component_slice(4)]]
    R, _ = oracle.residual_and_jacobian(X)
    got = np.r_[r_main[:2 * nv], r_main[space.component_slice(4)]]
    assert np.abs(got - R).max() < 1e-12 * max(1.0, np.abs(R).max())
    assert np.abs(r_mesh).max() == 0.0


def test_solid_residual_is_energy_gradient(rng):
    """Velocity rows of a solid cell at rest equal dE/du of the stored energy."""
    prm = FsiParameters(mu_s=2.0, lambda_s=5.0)
    mesh = rectangle_mesh(0, 1, 0, 0.5, 1, 1, material=SOLID)
    problem = FsiProblem(mesh, prm, quad_points=4)
    space = problem.space
    cd = space.hv.cell_dofs[0]
    U = np.zeros(space.n_dofs)
    ux = 0.01 * rng.standard_normal(len(cd))
    uy = 0.01 * rng.standard_normal(len(cd))
    U[space.component_dofs(2, cd)] = ux
    U[space.component_dofs(3, cd)] = uy
    r_main, _, _, _ = problem.assemble(U)
    c = mesh.active_cells[0]
    h = 1e-6
    for comp, base in ((0, ux), (1, uy)):
        grad = np.empty(len(cd))
        for a in range(len(cd)):
            up, dn = ux.copy(), uy.copy()
            (up if comp == 0 else dn)[a] += h
            e_plus = svk_energy(mesh, c, 2, up, dn, prm.mu_s, prm.lambda_s)
            (up if comp == 0 else dn)[a] -= 2 * h
            e_minus = svk_energy(mesh, c, 2, up, dn, prm.mu_s, prm.lambda_s)
            grad[a] = (e_plus - e_minus) / (2 * h)
        got = r_main[space.component_dofs(comp, cd)]
        assert np.abs(got - grad).max() < 1e-7 * max(1.0, np.abs(grad).max())


# -- Jacobian -----------------------------------------------------------------

@pytest.mark.parametrize("which", ["fsi1", "flow2d1"])
def test_jacobian_matches_finite_differences(which, fsi1_cfg, flow_cfg, fsi1_coarse, flow_coarse):
    cfg, mesh = (fsi1_cfg, fsi1_coarse) if which == "fsi1" else (flow_cfg, flow_coarse)
    problem = FsiProblem(mesh, cfg.params, cfg.dirichlet())
    errs = jacobian_fd_errors(problem, np.random.default_rng(7), n_states=4)
    assert max(errs) < 1e-5


def test_jacobian_with_hanging_nodes(fsi1_cfg, fsi1_coarse):
    problem = FsiProblem(partly_refined(fsi1_coarse, 30), fsi1_cfg.params, fsi1_cfg.dirichlet())
    assert max(jacobian_fd_errors(problem, np.random.default_rng(8), n_states=2)) < 1e-5


def test_jacobian_at_rest_has_saddle_structure(rng):
    """At rest the volume terms give a symmetric fluid block, B paired with -B^T and no v-u coupling."""
    prm = FsiParameters(rho_f=1.0, nu_f=0.1)
    problem = FsiProblem(rectangle_mesh(0, 1, 0, 1, 3, 2), prm, outflow_ids=())
    _, _, K, Km = problem.assemble(np.zeros(problem.n_dofs), vector=False, matrix=True)
    K = K.toarray()
    sp_ = problem.space
    v = slice(0, int(sp_.offsets[2]))
    u = slice(int(sp_.offsets[2]), int(sp_.offsets[4]))
    p = sp_.component_slice(4)
    assert np.allclose(K[v, v], K[v, v].T, atol=1e-14)
    assert np.allclose(K[v, p], -K[p, v].T, atol=1e-14)
    assert np.abs(K[v, u]).max() < 1e-14
    Kmu = Km.toarray()[u, u]
    assert np.allclose(Kmu, Kmu.T, atol=1e-14)
    assert np.all(np.linalg.eigvalsh(Kmu) > -1e-12)


def test_interface_displacement_rows_skip_mesh_motion(fsi1_cfg, fsi1_coarse):
    problem = FsiProblem(fsi1_coarse, fsi1_cfg.params, fsi1_cfg.dirichlet())
    masked = np.flatnonzero(problem.keep == 0.0)
    nv = problem.space.hv.n_dofs
    assert np.all((masked >= 2 * nv) & (masked < 4 * nv))
    # the interface is one open path of Q2 faces: 2 nodes per face plus one endpoint
    n_faces = len(interface_faces(fsi1_coarse))
    assert len(masked) == 2 * (2 * n_faces + 1)


# -- do-nothing outflow ---------------------------------------------------------

def test_do_nothing_correction_single_face():
    """v = (y, 0) on the unit square: the outflow term is -rho nu int psi_y ds."""
    prm = FsiParameters(rho_f=2.0, nu_f=0.3)
    mesh = rectangle_mesh(0, 1, 0, 1, 1, 1)
    with_dn = FsiProblem(mesh, prm, outflow_ids=(1,))
    without = FsiProblem(mesh, prm, outflow_ids=())
    space = with_dn.space
    U = space.interpolate({0: lambda x, y: y})
    diff = with_dn.assemble(U)[0] - without.assemble(U)[0]
    pts = space.hv.support_points
    expect = np.zeros(space.n_dofs)
    weights = {0.0: 1 / 6, 0.5: 4 / 6, 1.0: 1 / 6}
    for d, (x, y) in enumerate(pts):
        if x == 1.0:
            expect[space.offsets[1] + d] = -prm.rho_f * prm.nu_f * weights[y]
    assert np.allclose(diff, expect, atol=1e-14)


def test_do_nothing_vanishes_for_zero_velocity():
    mesh = rectangle_mesh(0, 1, 0, 1, 2, 2)
    a, b = FsiProblem(mesh, outflow_ids=(1,)), FsiProblem(mesh, outflow_ids=())
    U = a.space.interpolate({4: lambda x, y: 1 + x * y})
    assert np.abs(a.assemble(U)[0] - b.assemble(U)[0]).max() == 0.0


def poiseuille_problem(rho=1.0, nu=0.1):
    prm = FsiParameters(rho_f=rho, nu_f=nu)
    bc = [(2, "v", None), (0, "v", lambda x, y: np.column_stack([4 * y * (1 - y), 0 * y]))]
    bc += [(b, "u", None) for b in (0, 1, 2)]
    return FsiProblem(channel_mesh(8, 4), prm, bc), prm


def test_poiseuille_flow_is_preserved():
    problem, prm = poiseuille_problem()
    res = solve(problem, rtol=1e-14, atol=1e-13)
    space, U = problem.space, res.U
    pts = space.hv.support_points
    mu = prm.rho_f * prm.nu_f
    assert np.abs(U[space.component_slice(0)] - 4 * pts[:, 1] * (1 - pts[:, 1])).max() < 1e-8
    assert np.abs(U[space.component_slice(1)]).max() < 1e-8
    assert np.abs(U[space.offsets[2]:space.offsets[4]]).max() < 1e-8
    pp = space.hp.support_points
    assert np.abs(U[space.component_slice(4)] - 8 * mu * (2.0 - pp[:, 0])).max() < 1e-8


def test_eulerian_reduction_small_channel():
    prm = FsiParameters(rho_f=1.0, nu_f=0.02)
    bc = [(2, "v", None), (0, "v", lambda x, y: np.column_stack([4 * y * (1 - y) * (1 + y), 0 * y]))]
    v_err, p_err, u_max, _, _ = eulerian_solution_errors(channel_mesh(6, 3), prm, bc)
    assert max(v_err, p_err) < 1e-9
    assert u_max == 0.0


# -- Newton ---------------------------------------------------------------------

def test_newton_from_solution_takes_no_step():
    problem, _ = poiseuille_problem()
    U = solve(problem, rtol=1e-14, atol=1e-13).U
    again = solve(problem, U0=U)
    assert again.iterations == 0
    assert np.array_equal(again.U, U)


class ScalarSolve:
    def __init__(self, K):
        self.k = float(K[0, 0])

    def solve(self, b):
        return b / self.k


def test_newton_on_scalar_quadratic():
    res = newton_solve(lambda x: x ** 2 - 2.0, lambda x: np.array([[2.0 * x[0]]]), np.array([1.0]),
                       lambda d: d, factorize=ScalarSolve, rtol=1e-15, atol=1e-15)
    assert res.U[0] == pytest.approx(np.sqrt(2.0), abs=1e-15)
    assert 3 <= res.iterations <= 6


def test_newton_reports_failure():
    """exp(x) + 1 has no root, so the iteration limit is hit."""
    with pytest.raises(NewtonError) as exc:
        newton_solve(lambda x: np.exp(x) + 1.0, lambda x: np.array([[np.exp(x[0])]]), np.array([0.0]),
                     lambda d: d, factorize=ScalarSolve, max_iter=3)
    assert len(exc.value.history) == 4
    assert "no convergence" in str(exc.value)


def test_flow2d1_coarse_converges(flow_cfg, flow_coarse):
    res = solve(FsiProblem(flow_coarse, flow_cfg.params, flow_cfg.dirichlet()))
    assert res.converged
    assert res.history[-1] < 1e-10
    assert res.iterations <= 8


def test_fsi1_coarse_solution_is_physical(fsi1_cfg, fsi1_coarse):
    problem = FsiProblem(fsi1_coarse, fsi1_cfg.params, fsi1_cfg.dirichlet())
    res = solve(problem)
    assert quadratic_order(res.history) > 1.5
    space = problem.space
    q = gauss_square(4)
    kin = Kinematics(jets(space, res.U, Basis(space, np.arange(len(space.cells)), q.points, q.weights)))
    assert kin.J.min() > 0.0
    tip = displacement_at(space, res.U, (0.6, 0.2))
    assert tip[1] > 0.0
    solid = [c for c in fsi1_coarse.active_cells if fsi1_coarse.cell_material[c] == SOLID]
    assert solid and all(fsi1_coarse.cell_material[c] in (FLUID, SOLID) for c in fsi1_coarse.active_cells)
