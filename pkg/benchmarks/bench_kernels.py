"""Compare the compiled and numpy kernel backends on a Kovasznay-sized mesh.

    python benchmarks/bench_kernels.py --family cvt --n 32 --repeat 5
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from morley_ns import _kernels_py
from morley_ns.cases import make_mesh
from morley_ns.morley import MorleySpace

try:
    from morley_ns import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--family", default="square")
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    V = MorleySpace(make_mesh(args.family, args.n, lloyd_iters=20))
    rng = np.random.default_rng(0)
    psi, zeta = rng.standard_normal((2, V.n_dofs))
    i64 = lambda a: np.ascontiguousarray(a, dtype=np.int64)  # noqa: E731
    common = (i64(V.dof_ptr), i64(V.flat_dofs), V.flat_signs, i64(V.mat_ptr))
    cases = {
        "local_triplets": lambda m: m.local_triplets(*common, V.flat_stiffness),
        "trilinear_residual": lambda m: m.trilinear_residual(*common, V.flat_trilinear, V.flat_lap,
                                                             zeta, psi, V.n_dofs),
        "trilinear_jacobian": lambda m: m.trilinear_jacobian(*common, V.flat_trilinear, V.flat_lap, psi),
    }
    print(f"{args.family} n={args.n}: {V.mesh.n_cells} cells, {V.n_dofs} dofs")
    print(f"{'kernel':<22}{'python [ms]':>12}{'compiled [ms]':>15}{'speedup':>9}")
    for name, fn in cases.items():
        tp, ref = _time(lambda: fn(_kernels_py), args.repeat)
        if _kernels_c is None:
            print(f"{name:<22}{tp * 1e3:>12.2f}{'n/a':>15}")
            continue
        tc, out = _time(lambda: fn(_kernels_c), args.repeat)
        as_tuple = lambda x: x if isinstance(x, tuple) else (x,)  # noqa: E731
        for a, b in zip(as_tuple(ref), as_tuple(out)):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12), name
        print(f"{name:<22}{tp * 1e3:>12.2f}{tc * 1e3:>15.2f}{tp / tc:>9.1f}")


if __name__ == "__main__":
    main()
