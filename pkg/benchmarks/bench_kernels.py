"""Time the compiled and NumPy cell-local kernels on a realistic workload.

Usage: python3 benchmarks/bench_kernels.py [--cells N] [--repeat R]

The workload is one chunk of Q2/Q1 fluid cells with random jets. Both
backends are checked for agreement before timing.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from fsidwr import kernels
from fsidwr.fem import gauss_square
from fsidwr.fem.elements import element


def workload(n_cells, kv=2, kp=1, seed=0):
    rng = np.random.default_rng(seed)
    q = gauss_square(kv + 1)
    Q = len(q.weights)
    ev, ep = element(kv), element(kp)

    def basis(fe):
        B = np.empty((n_cells, Q, 3, fe.n_dofs))
        B[:, :, 0] = fe.values(q.points)
        g = fe.gradients(q.points)  # (Q, n, 2)
        scale = rng.uniform(5.0, 20.0, size=(n_cells, 1, 1))
        B[:, :, 1] = g[..., 0] * scale
        B[:, :, 2] = g[..., 1] * scale
        return B

    Bv, Bp = basis(ev), basis(ep)
    JxW = np.tile(q.weights, (n_cells, 1)) * rng.uniform(1e-4, 1e-3, size=(n_cells, 1))
    flux = rng.standard_normal((n_cells, Q, 15))
    C = rng.standard_normal((n_cells, Q, 15, 15))
    return Bv, Bp, JxW, flux, C


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    Bv, Bp, JxW, flux, C = workload(args.cells)
    mask = kernels.block_mask(C)
    backends = ["numpy"] + (["cython"] if kernels._ext is not None else [])
    if len(backends) == 1:
        print("compiled extension not available; timing the NumPy fallback only")

    ref_v = kernels.local_vectors(Bv, Bp, JxW, flux, backend="numpy")
    ref_m = kernels.local_matrices(Bv, Bp, JxW, C, mask, backend="numpy")
    for be in backends[1:]:
        dv = np.abs(kernels.local_vectors(Bv, Bp, JxW, flux, backend=be) - ref_v).max()
        dm = np.abs(kernels.local_matrices(Bv, Bp, JxW, C, mask, backend=be) - ref_m).max()
        print(f"{be}: max deviation from numpy  vectors {dv:.2e}  matrices {dm:.2e}")

    print(f"{args.cells} cells, {JxW.shape[1]} points/cell, local size {ref_m.shape[1]}")
    print(f"{'kernel':<16}{'backend':<10}{'best [ms]':>12}")
    times = {}
    for name, fn in (("local_vectors", lambda be: kernels.local_vectors(Bv, Bp, JxW, flux, backend=be)),
                     ("local_matrices", lambda be: kernels.local_matrices(Bv, Bp, JxW, C, mask, backend=be))):
        for be in backends:
            n = 3 if name == "local_matrices" else 20
            t = min(timeit.repeat(lambda: fn(be), number=n, repeat=args.repeat)) / n
            times[name, be] = t
            print(f"{name:<16}{be:<10}{1e3 * t:>12.3f}")
    if "cython" in backends:
        for name in ("local_vectors", "local_matrices"):
            print(f"speed-up {name}: {times[name, 'numpy'] / times[name, 'cython']:.2f}x")


if __name__ == "__main__":
    main()
