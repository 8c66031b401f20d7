import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from fsidwr import linalg
from fsidwr.linalg import CondensedFactorization, Factorization, SolverError, direct_solve, transpose_solve

BACKENDS = ["superlu"] + (["umfpack"] if linalg._umfpack is not None else [])


def random_sparse(n, rng, density=0.1, spd=False):
    A = sp.random(n, n, density=density, random_state=rng, data_rvs=rng.standard_normal)
    if spd:
        A = A @ A.T + n * sp.eye(n)
    else:
        A = A + n ** 0.5 * sp.eye(n)
    return sp.csr_matrix(A)


@pytest.mark.parametrize("backend", BACKENDS)
def test_identity(backend, rng):
    b = rng.standard_normal(7)
    assert np.array_equal(direct_solve(sp.eye(7), b, backend=backend), b)


@pytest.mark.parametrize("backend", BACKENDS)
def test_poisson_1d(backend):
    n = 100
    A = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()
    x = direct_solve(A, A @ np.ones(n), backend=backend)
    assert np.abs(x - 1).max() < 1e-10


@pytest.mark.parametrize("backend", BACKENDS)
def test_random_spd_against_dense_lu(backend, rng):
    A = random_sparse(50, rng, spd=True)
    b = rng.standard_normal(50)
    expect = sla.lu_solve(sla.lu_factor(A.toarray()), b)
    assert np.abs(direct_solve(A, b, backend=backend) - expect).max() < 1e-10


@pytest.mark.parametrize("backend", BACKENDS)
def test_transpose_symmetric_equals_direct(backend, rng):
    A = random_sparse(30, rng, spd=True)
    b = rng.standard_normal(30)
    assert np.allclose(transpose_solve(A, b, backend=backend), direct_solve(A, b, backend=backend), atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_transpose_3x3_closed_form(backend):
    A = sp.csr_matrix([[2.0, 1.0, 0.0], [0.0, 1.0, 3.0], [0.0, 0.0, 1.0]])
    b = np.array([1.0, 2.0, 3.0])
    # A^T = [[2,0,0],[1,1,0],[0,3,1]] -> forward substitution
    x0 = 0.5
    x1 = 2.0 - x0
    x2 = 3.0 - 3 * x1
    assert np.allclose(transpose_solve(A, b, backend=backend), [x0, x1, x2], atol=1e-14)


@pytest.mark.parametrize("backend", BACKENDS)
def test_transpose_random_against_dense(backend, rng):
    A = random_sparse(50, rng)
    b = rng.standard_normal(50)
    expect = np.linalg.solve(A.toarray().T, b)
    assert np.abs(transpose_solve(A, b, backend=backend) - expect).max() < 1e-10


@pytest.mark.parametrize("backend", BACKENDS)
def test_singular_matrix_raises(backend):
    A = sp.csr_matrix([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SolverError):
        direct_solve(A, np.array([1.0, 0.0]), backend=backend)


def test_non_finite_input_raises():
    with pytest.raises(FloatingPointError):
        direct_solve(sp.eye(3), np.array([1.0, np.nan, 0.0]))
    with pytest.raises(FloatingPointError):
        direct_solve(sp.csr_matrix([[np.inf, 0], [0, 1.0]]), np.ones(2))


def test_zero_rhs_gives_zero():
    assert np.array_equal(direct_solve(sp.eye(4) * 3, np.zeros(4)), np.zeros(4))


def test_stalled_refinement_accepted_at_rounding_floor(rng, caplog):
    """An rtol below double precision is met through the backward-error test."""
    A = random_sparse(60, rng)
    b = rng.standard_normal(60)
    with caplog.at_level("WARNING", logger="fsidwr.linalg"):
        x = Factorization(A, "superlu").solve(b, rtol=1e-30)
    assert np.linalg.norm(A @ x - b) < 1e-13 * np.linalg.norm(b)
    assert "rounding floor" in caplog.text


def test_wrong_answer_is_not_accepted(monkeypatch, rng):
    A = random_sparse(20, rng)
    f = Factorization(A, "superlu")
    monkeypatch.setattr(f, "_raw", lambda r, trans: 0.5 * r)
    with pytest.raises(SolverError, match="relative residual"):
        f.solve(rng.standard_normal(20))


def test_umfpack_failure_falls_back_to_superlu(monkeypatch, rng):
    if linalg._umfpack is None:
        pytest.skip("UMFPACK backend not available")
    A = random_sparse(40, rng)
    b = rng.standard_normal(40)
    f = Factorization(A, "umfpack")
    real = f._raw
    monkeypatch.setattr(f, "_raw", lambda r, trans: real(r, trans) + (1.0 if f.backend == "umfpack" else 0.0))
    x = f.solve(b)
    assert f.backend == "superlu"
    assert np.linalg.norm(A @ x - b) < 1e-10 * np.linalg.norm(b)


def block_system(rng, groups=6, m=3, skeleton=10):
    """Random matrix where each interior group couples only to itself and the skeleton."""
    n = groups * m + skeleton
    interior = np.arange(groups * m).reshape(groups, m)
    A = np.zeros((n, n))
    S = np.arange(groups * m, n)
    for g in interior:
        A[np.ix_(g, g)] = rng.standard_normal((m, m)) + 3 * np.eye(m)
        A[np.ix_(g, S)] = rng.standard_normal((m, skeleton))
        A[np.ix_(S, g)] = rng.standard_normal((skeleton, m))
    A[np.ix_(S, S)] = rng.standard_normal((skeleton, skeleton)) + 10 * np.eye(skeleton)
    return sp.csr_matrix(A), interior


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_condensed_factorization_matches_dense(seed, trans):
    rng = np.random.default_rng(seed)
    A, interior = block_system(rng)
    b = rng.standard_normal(A.shape[0])
    M = A.toarray().T if trans else A.toarray()
    x = CondensedFactorization(A, interior).solve(b, trans=trans)
    assert np.linalg.norm(M @ x - b) <= 1e-10 * np.linalg.norm(b)
    assert np.allclose(x, np.linalg.solve(M, b), rtol=1e-8, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_condensed_factorization_badly_scaled_rows(seed, trans):
    """Row scales spanning 13 decades, as in solid cells: backward stable."""
    rng = np.random.default_rng(seed)
    A, interior = block_system(rng)
    A = (sp.diags(10.0 ** rng.uniform(-6, 7, A.shape[0])) @ A).tocsr()
    b = rng.standard_normal(A.shape[0])
    M = A.toarray().T if trans else A.toarray()
    x = CondensedFactorization(A, interior).solve(b, trans=trans)
    berr = np.linalg.norm(M @ x - b) / (np.linalg.norm(np.abs(M) @ np.abs(x)) + np.linalg.norm(b))
    assert berr < linalg.BACKWARD_TOL


def test_condensed_rejects_coupled_groups(rng):
    A, interior = block_system(rng)
    A = A.tolil()
    A[0, 3] = 1.0
    with pytest.raises(ValueError):
        CondensedFactorization(A.tocsr(), interior)


def test_condensed_singular_block_raises(rng):
    A, interior = block_system(rng)
    A = A.tolil()
    for i in interior[0]:
        for j in interior[0]:
            A[i, j] = 0.0
    with pytest.raises(SolverError):
        CondensedFactorization(A.tocsr(), interior)


def test_scatter_helpers(rng):
    cd = np.array([[0, 1, 2], [2, 3, 4]])
    loc = rng.standard_normal((2, 3))
    v = linalg.scatter_vector(loc, cd, 5)
    expect = np.zeros(5)
    np.add.at(expect, cd, loc)
    assert np.allclose(v, expect)
    K = rng.standard_normal((2, 3, 3))
    A = linalg.scatter_matrix(K, cd, 5).toarray()
    dense = np.zeros((5, 5))
    for e in range(2):
        dense[np.ix_(cd[e], cd[e])] += K[e]
    assert np.allclose(A, dense)
