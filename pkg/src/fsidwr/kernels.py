"""Cell-local contraction kernels.

Weak forms are written pointwise as a flux ``f`` (one entry per jet
component) and, for Newton, its tangent ``C = df/djet``. The kernels turn
these into local vectors ``R[A] = sum_q w f . B[:, A]`` and local matrices
``K[A, B] = sum_q w B[:, A]^T C B[:, B]``.

The compiled extension ``fsidwr._kernels`` is used when available; the
NumPy implementation below is the fallback and the reference. Set
``FSIDWR_KERNELS=python`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from .fem.values import COMP_IDX

try:
    if os.environ.get("FSIDWR_KERNELS", "").lower() == "python":
        raise ImportError
    from . import _kernels as _ext
except ImportError:  # pragma: no cover - exercised when the extension is not built
    _ext = None

BACKEND = "cython" if _ext is not None else "numpy"


def _blocks(nv, np_):
    sizes = [nv, nv, nv, nv, np_]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    return sizes, offs


def block_mask(C):
    """5x5 mask of component pairs with a non-zero tangent block."""
    mask = np.zeros((5, 5), dtype=np.uint8)
    nz = np.any(C != 0.0, axis=(0, 1))
    for c in range(5):
        for d in range(5):
            mask[c, d] = bool(nz[np.ix_(COMP_IDX[c], COMP_IDX[d])].any())
    return mask


def local_vectors_numpy(Bv, Bp, JxW, flux):
    E, Q = JxW.shape
    sizes, offs = _blocks(Bv.shape[-1], Bp.shape[-1])
    out = np.empty((E, offs[-1]))
    fw = flux * JxW[..., None]
    for c in range(5):
        B = Bp if c == 4 else Bv
        out[:, offs[c]:offs[c + 1]] = np.einsum("eqa,eqan->en", fw[..., COMP_IDX[c]], B)
    return out


def local_matrices_numpy(Bv, Bp, JxW, C, mask=None):
    E, Q = JxW.shape
    sizes, offs = _blocks(Bv.shape[-1], Bp.shape[-1])
    if mask is None:
        mask = block_mask(C)
    out = np.zeros((E, offs[-1], offs[-1]))
    for c in range(5):
        Bc = Bp if c == 4 else Bv
        left = (Bc * JxW[..., None, None]).transpose(0, 3, 1, 2).reshape(E, sizes[c], Q * 3)
        for d in range(5):
            if not mask[c, d]:
                continue
            Bd = Bp if d == 4 else Bv
            Ccd = C[:, :, COMP_IDX[c]][:, :, :, COMP_IDX[d]]
            T = np.matmul(Ccd, Bd).reshape(E, Q * 3, sizes[d])
            out[:, offs[c]:offs[c + 1], offs[d]:offs[d + 1]] = np.matmul(left, T)
    return out


def local_vectors(Bv, Bp, JxW, flux, backend=None):
    backend = backend or BACKEND
    if backend == "cython":
        return _ext.local_vectors(np.ascontiguousarray(Bv), np.ascontiguousarray(Bp),
                                  np.ascontiguousarray(JxW), np.ascontiguousarray(flux),
                                  COMP_IDX.astype(np.intp))
    return local_vectors_numpy(Bv, Bp, JxW, flux)


def local_matrices(Bv, Bp, JxW, C, mask=None, backend=None):
    backend = backend or BACKEND
    if mask is None:
        mask = block_mask(C)
    if backend == "cython":
        return _ext.local_matrices(np.ascontiguousarray(Bv), np.ascontiguousarray(Bp),
                                   np.ascontiguousarray(JxW), np.ascontiguousarray(C),
                                   COMP_IDX.astype(np.intp), np.ascontiguousarray(mask, dtype=np.uint8))
    return local_matrices_numpy(Bv, Bp, JxW, C, mask)
