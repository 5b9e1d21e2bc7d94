"""Maximal operators and rearrangements on a grid.

``hl_maximal`` and ``sharp_maximal`` scan the whole cube family of the grid;
``hl_maximal_fast`` is the O(#cells * S) torus kernel checked against the
brute-force scan.  Pass ``workers > 1`` to split the cube sides over threads
(the compiled kernels release the GIL); results are reduced with an
elementwise max and do not depend on the split.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from bmointerp import kernels
from bmointerp.grid import GridFunction, GridSpec


class UnsupportedModeError(NotImplementedError):
    """Raised when a kernel is asked to run on a boundary mode it does not support."""


def _side_chunks(smax: int, workers: int) -> list[tuple[int, int]]:
    # balance by work ~ s^2 rather than by count
    if workers <= 1 or smax < 2:
        return [(1, smax)]
    cost = np.cumsum(np.arange(1, smax + 1, dtype=float) ** 2)
    edges = np.searchsorted(cost, cost[-1] * np.arange(1, workers) / workers) + 1
    bounds = [1, *sorted(set(int(e) for e in edges if 1 < e <= smax)), smax + 1]
    return [(lo, hi - 1) for lo, hi in zip(bounds[:-1], bounds[1:]) if lo <= hi - 1]


def _by_sides(call, smax: int, workers: int) -> np.ndarray:
    chunks = _side_chunks(smax, workers)
    if len(chunks) == 1:
        return call(*chunks[0])
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda c: call(*c), chunks))
    return np.maximum.reduce(parts)


def _result(grid: GridSpec, arr: np.ndarray) -> GridFunction:
    return GridFunction(grid, arr.reshape(grid.shape))


def hl_maximal(f: GridFunction, *, workers: int = 1, backend: str | None = None) -> GridFunction:
    """Hardy-Littlewood maximal function, brute force over the cube family."""
    g = f.grid
    impl = kernels.get_backend(backend)
    a = kernels.as2d(np.abs(f.values), g.dim)
    out = _by_sides(lambda lo, hi: impl.maximal_brute(a, g.dim, hi, g.torus, lo),
                    g.max_cube_side, workers)
    return _result(g, out)


def hl_maximal_fast(f: GridFunction, *, backend: str | None = None) -> GridFunction:
    """Same values as :func:`hl_maximal` for torus grids, in O(#cells * S)."""
    g = f.grid
    if not g.torus:
        raise UnsupportedModeError("hl_maximal_fast is unimplemented for zero_extend grids")
    impl = kernels.get_backend(backend)
    a = kernels.as2d(np.abs(f.values), g.dim)
    return _result(g, impl.maximal_fast(a, g.dim, g.max_cube_side))


def maximal(f: GridFunction) -> GridFunction:
    """Fastest available exact evaluation of Mf."""
    if f.grid.torus:
        return hl_maximal_fast(f)
    return hl_maximal(f)


def sharp_maximal(f: GridFunction, *, workers: int = 1, backend: str | None = None) -> GridFunction:
    """Fefferman-Stein sharp maximal function ``sup_{Q ∋ x} avg_Q |f - f_Q|``."""
    g = f.grid
    impl = kernels.get_backend(backend)
    v = f.values
    if g.torus:
        # oscillation ignores constants; centring makes f = const give exactly 0
        v = v - v.flat[0]
    re = kernels.as2d(v.real, g.dim)
    im = kernels.as2d(v.imag if f.is_complex else np.zeros(g.shape), g.dim)
    out = _by_sides(lambda lo, hi: impl.sharp_maximal(re, im, f.is_complex, g.dim, hi, g.torus, lo),
                    g.max_cube_side, workers)
    return _result(g, out)


def quantile_ranks(grid: GridSpec, lam: float) -> np.ndarray:
    """Entry ``s``: number of cells allowed to exceed the level in a side-``s`` cube.

    ``((f - c) chi_Q)^*(lam |Q|) <= r`` iff at most ``floor(lam * s^dim)`` cells
    of ``Q`` have ``|f - c| > r``.
    """
    sides = np.arange(grid.max_cube_side + 1)
    return np.floor(lam * sides.astype(float) ** grid.dim).astype(np.int_)


def local_sharp_maximal(f: GridFunction, lam: float, *, workers: int = 1,
                        backend: str | None = None) -> GridFunction:
    """Stromberg local sharp maximal function of a real grid function.

    The infimum over the centre ``c`` is exact: after sorting the cube's
    values, the best ``c`` is the midpoint of the tightest run of
    ``n - floor(lam n)`` consecutive values.
    """
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    if f.is_complex:
        raise TypeError("local_sharp_maximal is defined for real functions")
    g = f.grid
    impl = kernels.get_backend(backend)
    v = kernels.as2d(f.values, g.dim)
    ranks = quantile_ranks(g, lam)
    out = _by_sides(lambda lo, hi: impl.local_sharp_maximal(v, g.dim, hi, g.torus, ranks, lo),
                    g.max_cube_side, workers)
    return _result(g, out)


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous nonincreasing step function on ``[0, breakpoints[-1])``.

    ``values[k]`` is taken on ``[breakpoints[k], breakpoints[k + 1])``.
    """
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.breakpoints) != len(self.values) + 1:
            raise ValueError("need one more breakpoint than values")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(self.values) > 0) or np.any(self.values < 0):
            raise ValueError("values must be nonnegative and nonincreasing")

    @property
    def total_measure(self) -> float:
        return float(self.breakpoints[-1] - self.breakpoints[0])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.breakpoints, t, side="right") - 1
        inside = (k >= 0) & (k < len(self.values))
        out = np.where(inside, self.values[np.clip(k, 0, len(self.values) - 1)], 0.0)
        return out if out.ndim else float(out)

    def integral(self) -> float:
        return float(np.sum(self.values * np.diff(self.breakpoints)))


def rearrangement(f: GridFunction) -> StepFunction:
    a = np.abs(f.values).ravel()
    order = np.argsort(-a, kind="stable")  # ties by cell index
    h = f.grid.cell_measure
    return StepFunction(h * np.arange(a.size + 1), a[order])


def s0_tail(f: GridFunction) -> float:
    """``f*`` on its last step, i.e. the smallest ``|f|`` on the grid."""
    return float(np.abs(f.values).min())
