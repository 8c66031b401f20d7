# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled local contraction kernels (see fsidwr.kernels for the contract)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def local_vectors(double[:, :, :, ::1] Bv, double[:, :, :, ::1] Bp,
                  double[:, ::1] JxW, double[:, :, ::1] flux, Py_ssize_t[:, ::1] idx):
    cdef Py_ssize_t E = JxW.shape[0], Q = JxW.shape[1]
    cdef Py_ssize_t nv = Bv.shape[3], np_ = Bp.shape[3]
    cdef Py_ssize_t n = 4 * nv + np_
    out_arr = np.zeros((E, n))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e, q, c, A, off, nc
    cdef double w, f0, f1, f2
    cdef double[:, :, :, ::1] B
    for e in range(E):
        for q in range(Q):
            w = JxW[e, q]
            for c in range(5):
                f0 = w * flux[e, q, idx[c, 0]]
                f1 = w * flux[e, q, idx[c, 1]]
                f2 = w * flux[e, q, idx[c, 2]]
                if c < 4:
                    B = Bv
                    off = c * nv
                    nc = nv
                else:
                    B = Bp
                    off = 4 * nv
                    nc = np_
                for A in range(nc):
                    out[e, off + A] += f0 * B[e, q, 0, A] + f1 * B[e, q, 1, A] + f2 * B[e, q, 2, A]
    return out_arr


def local_matrices(double[:, :, :, ::1] Bv, double[:, :, :, ::1] Bp,
                   double[:, ::1] JxW, double[:, :, :, ::1] C, Py_ssize_t[:, ::1] idx,
                   unsigned char[:, ::1] mask):
    cdef Py_ssize_t E = JxW.shape[0], Q = JxW.shape[1]
    cdef Py_ssize_t nv = Bv.shape[3], np_ = Bp.shape[3]
    cdef Py_ssize_t n = 4 * nv + np_
    out_arr = np.zeros((E, n, n))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, q, c, d, A, Bi, a, b, offc, offd, nc, nd
    cdef double w, s0, s1, s2
    cdef double[:, :, :, ::1] Lc
    cdef double[:, :, :, ::1] Ld
    cdef double cc[3][3]
    for e in range(E):
        for q in range(Q):
            w = JxW[e, q]
            for c in range(5):
                if c < 4:
                    Lc = Bv
                    offc = c * nv
                    nc = nv
                else:
                    Lc = Bp
                    offc = 4 * nv
                    nc = np_
                for d in range(5):
                    if not mask[c, d]:
                        continue
                    if d < 4:
                        Ld = Bv
                        offd = d * nv
                        nd = nv
                    else:
                        Ld = Bp
                        offd = 4 * nv
                        nd = np_
                    for a in range(3):
                        for b in range(3):
                            cc[a][b] = w * C[e, q, idx[c, a], idx[d, b]]
                    for A in range(nc):
                        # s_b = sum_a B[a, A] * C[a, b]
                        s0 = Lc[e, q, 0, A] * cc[0][0] + Lc[e, q, 1, A] * cc[1][0] + Lc[e, q, 2, A] * cc[2][0]
                        s1 = Lc[e, q, 0, A] * cc[0][1] + Lc[e, q, 1, A] * cc[1][1] + Lc[e, q, 2, A] * cc[2][1]
                        s2 = Lc[e, q, 0, A] * cc[0][2] + Lc[e, q, 1, A] * cc[1][2] + Lc[e, q, 2, A] * cc[2][2]
                        if s0 == 0.0 and s1 == 0.0 and s2 == 0.0:
                            continue
                        for Bi in range(nd):
                            out[e, offc + A, offd + Bi] += s0 * Ld[e, q, 0, Bi] + s1 * Ld[e, q, 1, Bi] + s2 * Ld[e, q, 2, Bi]
    return out_arr
