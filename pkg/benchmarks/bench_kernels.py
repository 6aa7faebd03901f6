"""Benchmark the hot kernels: numba JIT path vs the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [N ...]

Times the twisted b-stencil, the fused dbar core, a full Laplacian block
apply, and one deflated-CG Green solve, for every importable backend.
DOLHODGE_NUMBA=0 would force the numpy path package-wide; here both are
loaded side by side.
"""

import sys
import time

import numpy as np

from dolhodge.family import FamilySpec
from dolhodge.hodge import FiberContext, Form01, green
from dolhodge.kernels import backends


def timeit(fn, *args, repeat=200):
    fn(*args)                      # warm up (JIT compile, caches)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_kernels(n):
    rng = np.random.default_rng(0)
    u = np.ascontiguousarray(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    block = np.ascontiguousarray(np.stack([u, 2 * u, 1j * u, u + 1, u - 1j, 0.5 * u], axis=2))
    up = np.exp(-2j * np.pi * 2 * np.arange(n) / n)
    dn = np.conj(up)
    coeffs = np.array([1.0, -8.0, 0.0, 8.0, -1.0], dtype=complex) * n / 12.0
    da_u = np.ascontiguousarray(rng.standard_normal((n, n)) + 0j)
    diag = np.ascontiguousarray(rng.standard_normal((n, n)) + 0j)
    rows = []
    for name, mod in backends().items():
        t_st = timeit(mod.b_stencil, u, up, dn, coeffs)
        t_core = timeit(mod.dbar_core, u, da_u, 0.5 + 0.1j, -0.25j, up, dn, coeffs, diag)
        t_blk = timeit(mod.b_stencil3, block, up, dn, coeffs)
        rows.append((name, t_st, t_core, t_blk))
    return rows


def bench_green(n):
    out = {}
    for name in backends():
        import dolhodge.kernels as K
        saved = (K.b_stencil, K.dbar_core, K.b_stencil3, K.dbar_core3)
        mod = backends()[name]
        K.b_stencil, K.dbar_core = mod.b_stencil, mod.dbar_core
        K.b_stencil3, K.dbar_core3 = mod.b_stencil3, mod.dbar_core3
        try:
            spec = FamilySpec.create(tau=1j, degree=2, twist=[np.pi], rescale=[[0.3]], n_side=n)
            ctx = FiberContext.get(spec, (0.0,))
            ctx.harmonic(1)        # not timed
            rng = np.random.default_rng(1)
            xi = Form01(np.ascontiguousarray(rng.standard_normal((n, n)) + 0j), ctx)
            green(xi)              # warm up
            t0 = time.perf_counter()
            for _ in range(5):
                green(xi)
            out[name] = (time.perf_counter() - t0) / 5
        finally:
            K.b_stencil, K.dbar_core, K.b_stencil3, K.dbar_core3 = saved
    return out


def main(argv):
    sizes = [int(a) for a in argv[1:]] or [32, 48, 64]
    print(f"{'N':>4} {'backend':>8} {'b_stencil':>12} {'dbar_core':>12} {'block(6)':>12}")
    for n in sizes:
        for name, t_st, t_core, t_blk in bench_kernels(n):
            print(f"{n:>4} {name:>8} {t_st * 1e6:>10.1f}us {t_core * 1e6:>10.1f}us "
                  f"{t_blk * 1e6:>10.1f}us")
    n = sizes[-1]
    print(f"\nGreen solve (deflated CG, N={n}):")
    for name, t in bench_green(n).items():
        print(f"  {name:>8}: {t * 1e3:.1f} ms")


if __name__ == "__main__":
    main(sys.argv)
