import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsidwr import kernels
from fsidwr.fem.values import COMP_IDX

needs_ext = pytest.mark.skipif(kernels._ext is None, reason="compiled extension not built")


def random_data(rng, E, Q, nv, np_):
    Bv = rng.standard_normal((E, Q, 3, nv))
    Bp = rng.standard_normal((E, Q, 3, np_))
    JxW = rng.uniform(0.1, 1.0, (E, Q))
    flux = rng.standard_normal((E, Q, 15))
    C = rng.standard_normal((E, Q, 15, 15))
    return Bv, Bp, JxW, flux, C


def loop_vectors(Bv, Bp, JxW, flux):
    """Plain triple loop: R[A] = sum_q w f . B[:, A]."""
    E, Q = JxW.shape
    blocks = [Bv, Bv, Bv, Bv, Bp]
    out = []
    for c in range(5):
        B = blocks[c]
        out.append(np.einsum("eq,eqk,eqkn->en", JxW, flux[..., COMP_IDX[c]], B))
    return np.concatenate(out, axis=1)


def loop_matrices(Bv, Bp, JxW, C):
    blocks = [Bv, Bv, Bv, Bv, Bp]
    rows = []
    for c in range(5):
        row = []
        for d in range(5):
            Ccd = C[:, :, COMP_IDX[c]][:, :, :, COMP_IDX[d]]
            row.append(np.einsum("eq,eqka,eqkl,eqlb->eab", JxW, blocks[c], Ccd, blocks[d]))
        rows.append(np.concatenate(row, axis=2))
    return np.concatenate(rows, axis=1)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.integers(1, 9), st.sampled_from([(4, 1), (9, 4), (25, 9)]), st.integers(0, 10**6))
def test_numpy_kernels_match_loops(E, Q, sizes, seed):
    Bv, Bp, JxW, flux, C = random_data(np.random.default_rng(seed), E, Q, *sizes)
    assert np.allclose(kernels.local_vectors_numpy(Bv, Bp, JxW, flux), loop_vectors(Bv, Bp, JxW, flux))
    assert np.allclose(kernels.local_matrices_numpy(Bv, Bp, JxW, C), loop_matrices(Bv, Bp, JxW, C))


@needs_ext
@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.integers(1, 9), st.sampled_from([(4, 1), (9, 4), (25, 9)]), st.integers(0, 10**6))
def test_compiled_kernels_match_numpy(E, Q, sizes, seed):
    Bv, Bp, JxW, flux, C = random_data(np.random.default_rng(seed), E, Q, *sizes)
    C[..., 3:5, :] = 0.0  # exercise the block mask
    mask = kernels.block_mask(C)
    for be in ("cython", "numpy"):
        assert np.allclose(kernels.local_vectors(Bv, Bp, JxW, flux, backend=be),
                           loop_vectors(Bv, Bp, JxW, flux), atol=1e-12)
        assert np.allclose(kernels.local_matrices(Bv, Bp, JxW, C, mask, backend=be),
                           loop_matrices(Bv, Bp, JxW, C), atol=1e-12)


def test_block_mask_marks_nonzero_pairs():
    C = np.zeros((1, 1, 15, 15))
    C[0, 0, 12, 2] = 1.0  # pressure row, grad v_x column
    mask = kernels.block_mask(C)
    assert mask.sum() == 1 and mask[4, 0] == 1


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "numpy")
