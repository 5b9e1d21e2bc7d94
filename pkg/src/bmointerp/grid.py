"""Uniform grids on the torus or on a zero-padded box, and the cubes they carry.

Every integral in the package is a cell sum times ``spacing ** dim``.  A cube
is an axis-aligned block of ``side ** dim`` cells identified by its lowest
corner cell (the *anchor*).  On the torus, anchors wrap; in ``zero_extend``
mode a cube may hang over the edge of the grid, the missing cells count as
zero in sums but keep their full measure.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

TORUS = "torus"
ZERO_EXTEND = "zero_extend"
BOUNDARIES = (TORUS, ZERO_EXTEND)


class GridError(ValueError):
    """Invalid grid parameters or incompatible grids."""


@dataclass(frozen=True)
class GridSpec:
    dim: int
    sides: tuple[int, ...]
    spacing: float = 1.0
    boundary: str = TORUS
    max_cube_side: int | None = None

    def __post_init__(self):
        sides = tuple(int(n) for n in np.atleast_1d(self.sides))
        object.__setattr__(self, "sides", sides)
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if len(sides) != self.dim:
            raise GridError(f"expected {self.dim} side lengths, got {sides}")
        if min(sides) < 1:
            raise GridError(f"cell counts must be positive, got {sides}")
        if not (np.isfinite(self.spacing) and self.spacing > 0):
            raise GridError(f"spacing must be positive, got {self.spacing}")
        if self.boundary not in BOUNDARIES:
            raise GridError(f"boundary must be one of {BOUNDARIES}")
        smax = min(sides) if self.max_cube_side is None else int(self.max_cube_side)
        if not 1 <= smax <= min(sides):
            raise GridError(f"max_cube_side must lie in [1, {min(sides)}], got {smax}")
        object.__setattr__(self, "max_cube_side", smax)

    @classmethod
    def line(cls, n: int, **kw) -> "GridSpec":
        return cls(1, (n,), **kw)

    @classmethod
    def square(cls, n: int, **kw) -> "GridSpec":
        return cls(2, (n, n), **kw)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sides

    @property
    def torus(self) -> bool:
        return self.boundary == TORUS

    @property
    def cell_measure(self) -> float:
        return self.spacing ** self.dim

    @property
    def ncells(self) -> int:
        return int(np.prod(self.sides))

    @property
    def total_measure(self) -> float:
        return self.cell_measure * self.ncells

    def with_(self, **changes) -> "GridSpec":
        params = dict(dim=self.dim, sides=self.sides, spacing=self.spacing,
                      boundary=self.boundary, max_cube_side=self.max_cube_side)
        params.update(changes)
        return GridSpec(**params)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "sides": list(self.sides), "spacing": self.spacing,
                "boundary": self.boundary, "max_cube_side": self.max_cube_side}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def anchors(self, side: int, axis: int) -> range:
        n = self.sides[axis]
        if self.torus:
            return range(n)
        return range(-(side - 1), n)


@dataclass(frozen=True, order=True)
class Cube:
    side: int
    anchor: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "anchor", tuple(int(a) for a in np.atleast_1d(self.anchor)))
        if self.side < 1:
            raise GridError(f"cube side must be >= 1, got {self.side}")

    def measure(self, grid: GridSpec) -> float:
        return (self.side * grid.spacing) ** grid.dim

    def index_ranges(self, grid: GridSpec) -> list[np.ndarray]:
        """Per-axis cell indices covered by the cube (torus indices reduced
        mod the side, zero_extend indices possibly out of range)."""
        out = []
        for a, n in zip(self.anchor, grid.sides):
            idx = np.arange(a, a + self.side)
            out.append(idx % n if grid.torus else idx)
        return out

    def cells(self, grid: GridSpec) -> list[tuple[int, ...]]:
        """Cells of the cube that lie on the grid."""
        ranges = [[i for i in r if 0 <= i < n] for r, n in zip(self.index_ranges(grid), grid.sides)]
        if grid.dim == 1:
            return [(i,) for i in ranges[0]]
        return [(i, j) for i in ranges[0] for j in ranges[1]]

    def contains(self, grid: GridSpec, cell: Sequence[int]) -> bool:
        return all(int(c) in set(r.tolist()) for c, r in zip(cell, self.index_ranges(grid)))


@dataclass
class GridFunction:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if not np.iscomplexobj(v):
            v = v.astype(float, copy=False)
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise GridError("grid function values must be finite")
        self.values = v

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def abs(self) -> "GridFunction":
        return GridFunction(self.grid, np.abs(self.values))

    def real(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.real.copy())

    def imag(self) -> "GridFunction":
        return GridFunction(self.grid, np.asarray(self.values.imag, dtype=float).copy())

    def map(self, fn) -> "GridFunction":
        return GridFunction(self.grid, fn(self.values))

    def integral(self) -> complex | float:
        return self.values.sum() * self.grid.cell_measure

    def mean(self) -> complex | float:
        return self.values.mean()

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _vals(other, self.grid))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _vals(other, self.grid))

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * _vals(other, self.grid))

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def to_dict(self) -> dict:
        d = self.grid.to_dict()
        flat = self.values.ravel()
        if self.is_complex:
            d["values"] = [[float(z.real), float(z.imag)] for z in flat]
        else:
            d["values"] = [float(x) for x in flat]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "GridFunction":
        grid = GridSpec(d["dim"], tuple(d["sides"]), d.get("spacing", 1.0),
                        d.get("boundary", TORUS), d.get("max_cube_side"))
        raw = d["values"]
        if raw and isinstance(raw[0], (list, tuple)):
            vals = np.array([complex(re, im) for re, im in raw])
        else:
            vals = np.array(raw, dtype=float)
        return cls(grid, vals)

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        return cls.from_dict(json.loads(text))


def _vals(other, grid: GridSpec):
    if isinstance(other, GridFunction):
        if other.grid != grid:
            raise GridError("grid functions live on different grids")
        return other.values
    return other


def as_function(grid: GridSpec, f) -> GridFunction:
    return f if isinstance(f, GridFunction) else GridFunction(grid, f)


def cube_family(grid: GridSpec) -> list[Cube]:
    """All cubes of side <= max_cube_side, ordered by side then anchor."""
    return list(iter_cubes(grid))


def iter_cubes(grid: GridSpec) -> Iterator[Cube]:
    for s in range(1, grid.max_cube_side + 1):
        if grid.dim == 1:
            for a in grid.anchors(s, 0):
                yield Cube(s, (a,))
        else:
            for a in grid.anchors(s, 0):
                for b in grid.anchors(s, 1):
                    yield Cube(s, (a, b))


def cube_values(f: GridFunction, q: Cube) -> np.ndarray:
    """Values of ``f`` on the cells of ``q`` (zeros for overhanging cells)."""
    grid = f.grid
    ranges = q.index_ranges(grid)
    if grid.torus:
        return f.values[np.ix_(*ranges)].ravel()
    padded = np.zeros((q.side,) * grid.dim, dtype=f.values.dtype)
    inside = [(r >= 0) & (r < n) for r, n in zip(ranges, grid.sides)]
    sub = f.values[np.ix_(*[r[m] for r, m in zip(ranges, inside)])]
    padded[np.ix_(*[np.flatnonzero(m) for m in inside])] = sub
    return padded.ravel()


def cube_average(f: GridFunction, q: Cube):
    """Mean of ``f`` over ``q``: the cell sum times h^dim divided by |Q|."""
    # (sum * h^d) / (s h)^d simplifies to sum / s^d, which keeps side-1 averages exact
    return cube_values(f, q).sum() / q.side ** f.grid.dim


def translate_cube(q: Cube, x: Sequence[int], grid: GridSpec) -> Cube:
    x = tuple(int(v) for v in np.atleast_1d(x))
    if grid.torus:
        anchor = tuple((a + d) % n for a, d, n in zip(q.anchor, x, grid.sides))
    else:
        anchor = tuple(a + d for a, d in zip(q.anchor, x))
    return Cube(q.side, anchor)


def translate(f: GridFunction, x: Sequence[int]) -> GridFunction:
    """Torus shift ``(T_x f)(y) = f(y - x)``."""
    if not f.grid.torus:
        raise GridError("translation of grid functions is defined on the torus only")
    x = tuple(int(v) for v in np.atleast_1d(x))
    return GridFunction(f.grid, np.roll(f.values, x, axis=tuple(range(f.grid.dim))))


# --- windowed views used by the vectorised code paths -----------------------

def pad_for_side(values: np.ndarray, side: int, torus: bool) -> np.ndarray:
    """Pad so that every cube of ``side`` is a contiguous window.

    Window ``k`` (per axis) of the result is the cube with anchor ``k`` on the
    torus and anchor ``k - (side - 1)`` in zero_extend mode.
    """
    if torus:
        return np.pad(values, [(0, side - 1)] * values.ndim, mode="wrap")
    return np.pad(values, [(side - 1, side - 1)] * values.ndim)


def cube_windows(values: np.ndarray, side: int, torus: bool) -> np.ndarray:
    """Array of shape ``anchors + (side,)*dim`` holding every cube's values."""
    return sliding_window_view(pad_for_side(values, side, torus), (side,) * values.ndim)


def cover_max(per_anchor: np.ndarray, side: int, torus: bool) -> np.ndarray:
    """For each cell, the max of ``per_anchor`` over the cubes containing it."""
    if torus:
        padded = np.pad(per_anchor, [(side - 1, 0)] * per_anchor.ndim, mode="wrap")
    else:
        padded = per_anchor
    win = sliding_window_view(padded, (side,) * per_anchor.ndim)
    axes = tuple(range(per_anchor.ndim, 2 * per_anchor.ndim))
    return win.max(axis=axes)


def cube_means(values: np.ndarray, side: int, torus: bool, interior: bool = False) -> np.ndarray:
    """Average over every cube of ``side``, indexed like :func:`cube_windows`.

    Sums are taken one axis at a time, so memory stays O(#anchors).  With
    ``interior=True`` (zero_extend only) overhanging cubes are dropped and
    anchor ``k`` is the cube starting at cell ``k``.
    """
    if torus:
        p = pad_for_side(values, side, True)
    elif interior:
        p = values
    else:
        p = pad_for_side(values, side, False)
    for axis in range(values.ndim):
        p = sliding_window_view(p, side, axis=axis).sum(axis=-1)
    return p / side ** values.ndim
