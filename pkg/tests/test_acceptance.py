"""Acceptance criteria 1-9, each reported as one PASS/FAIL line.

The two benchmark runs (criteria 3-5) take about two minutes together.
The lines are printed as they are decided and again in the terminal summary.
"""
import dataclasses

import numpy as np
import pytest

import checks
from checks import (eulerian_solution_errors, goal_fd_errors, jacobian_fd_errors, reproduce_polynomials,
                    stokes_polynomial_error, stokes_rates)
from fsidwr.driver import run_adaptive
from fsidwr.dwr import adjoint_problem, solve_adjoint
from fsidwr.fsi_model import FsiProblem, solve

FLOW_DRAG = (5.56, 5.60)
FLOW_PDIFF = (0.115, 0.120)
FLOW_LIFT = (0.009, 0.012)
FLOW_EFF = (0.5, 1.5)

FSI_DRAG, FSI_DRAG_TOL = 15.370185576528707, 0.01
FSI_DISY, FSI_DISY_TOL = 8.1965770448936843e-04, 0.10
FSI_DISX, FSI_DISX_TOL = 2.2656126465725842e-05, 0.20
FSI_PDIFF, FSI_PDIFF_TOL = 148.19455817646477, 0.02
FSI_EFF = (0.15, 1.0)


def verdict(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    checks.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def rel(a, b):
    return abs(a - b) / abs(b)


def inside(x, lo_hi):
    return lo_hi[0] <= x <= lo_hi[1]


@pytest.fixture(scope="module")
def flow_run(flow_cfg, tmp_path_factory):
    cfg = dataclasses.replace(flow_cfg, output=str(tmp_path_factory.mktemp("flow2d1")), write_vtk=False)
    return run_adaptive(cfg, echo=lambda *_: None)


@pytest.fixture(scope="module")
def fsi_run(fsi1_cfg, tmp_path_factory):
    cfg = dataclasses.replace(fsi1_cfg, output=str(tmp_path_factory.mktemp("fsi1")), write_vtk=False)
    return run_adaptive(cfg, echo=lambda *_: None)


def coarse_problems(fsi1_cfg, flow_cfg, fsi1_coarse, flow_coarse):
    return [("fsi1", fsi1_cfg, FsiProblem(fsi1_coarse, fsi1_cfg.params, fsi1_cfg.dirichlet())),
            ("flow2d1", flow_cfg, FsiProblem(flow_coarse, flow_cfg.params, flow_cfg.dirichlet()))]


def test_criterion_1_jacobian_consistency(fsi1_cfg, flow_cfg, fsi1_coarse, flow_coarse):
    worst = {}
    for name, _, problem in coarse_problems(fsi1_cfg, flow_cfg, fsi1_coarse, flow_coarse):
        worst[name] = max(jacobian_fd_errors(problem, np.random.default_rng(101), n_states=10))
    ok = max(worst.values()) < 1e-5
    detail = ", ".join(f"{k} max rel err {v:.1e}" for k, v in worst.items())
    assert verdict(1, ok, f"Jacobian vs central differences, 10 states each: {detail} (< 1e-5)")


def test_criterion_2_goal_derivative_consistency(fsi1_cfg, flow_cfg, fsi1_coarse, flow_coarse):
    worst = {}
    for name, cfg, problem in coarse_problems(fsi1_cfg, flow_cfg, fsi1_coarse, flow_coarse):
        worst[name] = max(goal_fd_errors(problem, cfg.params, cfg.goal, np.random.default_rng(202), n_states=10))
    ok = max(worst.values()) < 1e-5
    detail = ", ".join(f"{k} max rel err {v:.1e}" for k, v in worst.items())
    assert verdict(2, ok, f"goal derivative vs central differences, 10 states each: {detail} (< 1e-5)")


@pytest.mark.slow
def test_criterion_3_partition_of_unity_telescoping(flow_run, fsi_run):
    errs = [abs(r.eta - r.weighted_residual) / abs(r.weighted_residual) for r in flow_run + fsi_run]
    ok = max(errs) < 1e-10
    assert verdict(3, ok, f"sum eta_i vs global weighted residual over {len(errs)} loops: "
                          f"max rel diff {max(errs):.1e} (< 1e-10)")


@pytest.mark.slow
def test_criterion_4_flow_benchmark(flow_run):
    last = flow_run[-1].quantities
    drag, pdiff, lift = last["Face drag"], last["P-Diff"], last["Face lift"]
    effs = [r.effectivity for r in flow_run[-2:]]
    parts = {
        f"drag {drag:.6f} in {FLOW_DRAG}": inside(drag, FLOW_DRAG),
        f"P-Diff {pdiff:.6f} in {FLOW_PDIFF}": inside(pdiff, FLOW_PDIFF),
        f"lift {lift:.6f} in {FLOW_LIFT}": inside(lift, FLOW_LIFT),
        f"Eff last two {effs[0]:.3f}, {effs[1]:.3f} in {FLOW_EFF}": all(inside(e, FLOW_EFF) for e in effs),
        f"{len(flow_run)} loops <= 4": len(flow_run) <= 4,
    }
    ok = all(parts.values())
    failed = [k for k, v in parts.items() if not v]
    assert verdict(4, ok, "2D-1: " + "; ".join(parts) + (f" -- failed: {failed}" if failed else "")), failed


@pytest.mark.slow
def test_criterion_5_fsi_benchmark(fsi_run):
    q = fsi_run[-1].quantities
    true = [r.true_error for r in fsi_run]
    est = [r.est_error for r in fsi_run]
    effs = [r.effectivity for r in fsi_run]
    parts = {
        f"drag {q['Face drag']:.5f} within 1% of {FSI_DRAG:.5f} (off {rel(q['Face drag'], FSI_DRAG):.1%})":
            rel(q["Face drag"], FSI_DRAG) <= FSI_DRAG_TOL,
        f"DisY {q['DisY']:.4e} within 10%": rel(q["DisY"], FSI_DISY) <= FSI_DISY_TOL,
        f"DisX {q['DisX']:.4e} within 20%": rel(q["DisX"], FSI_DISX) <= FSI_DISX_TOL,
        f"P-Diff {q['P-Diff']:.3f} within 2%": rel(q["P-Diff"], FSI_PDIFF) <= FSI_PDIFF_TOL,
        "true err decreasing": len(true) == 4 and all(b < a for a, b in zip(true, true[1:])),
        "|eta| decreasing": len(est) == 4 and all(b < a for a, b in zip(est, est[1:])),
        f"Eff {min(effs):.2f}..{max(effs):.2f} in {FSI_EFF}": all(inside(e, FSI_EFF) for e in effs),
        f"final DoFs {fsi_run[-1].dofs} <= ~70k": fsi_run[-1].dofs <= 80000,
    }
    ok = all(parts.values())
    failed = [k for k, v in parts.items() if not v]
    assert verdict(5, ok, "FSI-1: " + "; ".join(parts) + (f" -- failed: {failed}" if failed else "")), failed


def test_criterion_6_eulerian_reduction(flow_cfg, flow_coarse):
    bc = [d for d in flow_cfg.dirichlet() if d[1] == "v"]
    v_err, p_err, u_max, _, _ = eulerian_solution_errors(flow_coarse, flow_cfg.params, bc)
    ok = max(v_err, p_err) < 1e-9 and u_max == 0.0
    assert verdict(6, ok, f"ALE with all-fluid mesh vs Eulerian Navier-Stokes: max |dv| {v_err:.1e}, "
                          f"max |dp| {p_err:.1e} (< 1e-9), max |u| {u_max:.1e}")


def test_criterion_7_adjoint_is_linear(fsi1_cfg, flow_cfg, fsi1_coarse, flow_coarse):
    its = {}
    for name, cfg, problem in coarse_problems(fsi1_cfg, flow_cfg, fsi1_coarse, flow_coarse):
        U = solve(problem).U
        its[name] = solve_adjoint(adjoint_problem(problem), problem.space, U, cfg.params, cfg.goal,
                                  newton=True).iterations
    ok = all(n == 1 for n in its.values())
    assert verdict(7, ok, "adjoint through the Newton driver: "
                          + ", ".join(f"{k} {v} iteration(s)" for k, v in its.items()) + " (== 1)")


def test_criterion_8_manufactured_stokes():
    poly = stokes_polynomial_error()
    errs, rates = stokes_rates()
    ok = poly < 1e-10 and min(rates) >= 2.7
    assert verdict(8, ok, f"Q2/Q1 Stokes: polynomial solution error {poly:.1e} (< 1e-10); trigonometric L2 "
                          f"orders {', '.join(f'{r:.2f}' for r in rates)} (>= 2.7)")


def test_criterion_9_constraint_exactness():
    errs = {(k, lv): reproduce_polynomials(k, lv) for k in (1, 2, 4) for lv in (1, 2)}
    worst = max(errs.values())
    ok = worst < 1e-12
    assert verdict(9, ok, f"hanging-node interpolants of Q1/Q2/Q4 polynomials, 1-2 hanging levels: "
                          f"max pointwise error {worst:.1e} (< 1e-12)")
