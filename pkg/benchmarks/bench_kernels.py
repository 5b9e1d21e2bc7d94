"""Compiled vs pure-Python cube-scan kernels.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each row times one kernel on both backends, checks that the outputs agree and
prints the speedup.
"""
import argparse
import sys
import timeit

import numpy as np

from bmointerp import kernels
from bmointerp.grid import GridSpec
from bmointerp.maximal import hl_maximal, hl_maximal_fast, local_sharp_maximal, sharp_maximal
from bmointerp.sampling import cycled_function


def cases(quick):
    n1 = 256 if quick else 1024
    n2 = 24 if quick else 48
    line, square = GridSpec.line(n1), GridSpec.square(n2)
    f1 = cycled_function(line, 0, "bench", 0, signed=True)
    f2 = cycled_function(square, 0, "bench", 1, signed=True)
    c1 = cycled_function(line, 0, "bench", 2, signed=True, complex_=True)
    f4 = cycled_function(GridSpec.line(n1 // 4), 0, "bench", 4, signed=True)
    zs = np.stack([kernels.as2d(cycled_function(line, 0, "bench-z", k, signed=True).values, 1)
                   for k in range(4)])

    def gsup(backend):
        impl = kernels.get_backend(backend)
        return impl.gfamily_sup(zs, np.zeros_like(zs), kernels.as2d(f1.values, 1),
                                np.zeros((1, n1)), 1, line.max_cube_side, True)

    def exceed(backend):
        small = GridSpec.line(n1 // 4)
        g = cycled_function(small, 0, "bench", 3, signed=True)
        return kernels.get_backend(backend).min_exceedance(kernels.as2d(g.values, 1), 1,
                                                           small.max_cube_side, True, 0.5)

    yield f"M brute 1-D N={n1}", lambda b: hl_maximal(f1, backend=b).values
    yield f"M fast 1-D N={n1}", lambda b: hl_maximal_fast(f1, backend=b).values
    yield f"M brute 2-D N={n2}^2", lambda b: hl_maximal(f2, backend=b).values
    yield f"M fast 2-D N={n2}^2", lambda b: hl_maximal_fast(f2, backend=b).values
    yield f"f# real 1-D N={n1}", lambda b: sharp_maximal(f1, backend=b).values
    yield f"f# complex 1-D N={n1}", lambda b: sharp_maximal(c1, backend=b).values
    yield f"f# 2-D N={n2}^2", lambda b: sharp_maximal(f2, backend=b).values
    yield f"local f# 1-D N={n1 // 4}", lambda b: local_sharp_maximal(f4, 0.25, backend=b).values
    yield f"min exceedance 1-D N={n1 // 4}", exceed
    yield f"g-family sup 4 points N={n1}", gsup


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller grids")
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the python backend is available", file=sys.stderr)
        return 1
    print(f"{'kernel':34s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}  max|diff|")
    for name, fn in cases(args.quick):
        a, b = np.asarray(fn("cython")), np.asarray(fn("python"))
        diff = float(np.max(np.abs(a.astype(float) - b.astype(float)))) if a.size else 0.0
        tc = min(timeit.repeat(lambda: fn("cython"), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fn("python"), number=1, repeat=args.repeat))
        print(f"{name:34s} {tc:10.4f} {tp:10.4f} {tp / tc:7.1f}x  {diff:.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
