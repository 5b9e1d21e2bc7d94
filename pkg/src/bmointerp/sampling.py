"""Seeded random grid functions.

Every random draw comes from a Philox (counter-based) generator keyed by the
user seed plus a tuple of labels, typically ``(suite, trial)``, so a trial can
be reproduced on its own, in any order, on any worker.
"""
from __future__ import annotations

import zlib

import numpy as np

from bmointerp.grid import Cube, GridFunction, GridSpec

DISTRIBUTIONS = ("lognormal", "spikes", "smooth")


def stream(seed: int, *labels) -> np.random.Generator:
    words = [int(seed) & 0xFFFFFFFF]
    words += [zlib.crc32(str(lab).encode()) for lab in labels]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def _lognormal(grid, rng, sigma=1.0):
    return rng.lognormal(0.0, sigma, size=grid.shape)


def _spikes(grid, rng):
    out = np.zeros(grid.ncells)
    k = int(rng.integers(1, max(2, grid.ncells // 16) + 1))
    cells = rng.choice(grid.ncells, size=k, replace=False)
    out[cells] = rng.lognormal(0.0, 1.0, size=k)
    return out.reshape(grid.shape)


def _smooth(grid, rng, modes=4):
    coords = np.meshgrid(*[np.arange(n) / n for n in grid.sides], indexing="ij")
    out = np.zeros(grid.shape)
    for _ in range(modes):
        freq = rng.integers(0, 4, size=grid.dim)
        if not freq.any():
            freq[0] = 1
        phase = sum(2 * np.pi * k * x for k, x in zip(freq, coords))
        out += rng.normal() * np.cos(phase + rng.uniform(0, 2 * np.pi))
    return out


def random_values(grid: GridSpec, rng: np.random.Generator, kind: str = "lognormal", *,
                  signed: bool = False, complex_: bool = False) -> np.ndarray:
    """Draw one array of cell values.

    ``signed`` gives lognormal/spike draws random signs (smooth draws are
    signed already); ``complex_`` adds an independent imaginary part.
    """
    def one():
        if kind == "lognormal":
            v = _lognormal(grid, rng)
        elif kind == "spikes":
            v = _spikes(grid, rng)
        elif kind == "smooth":
            v = _smooth(grid, rng)
            return v if signed else np.abs(v)
        else:
            raise ValueError(f"unknown distribution {kind!r}")
        if signed:
            v = v * rng.choice([-1.0, 1.0], size=grid.shape)
        return v

    v = one()
    if complex_:
        v = v + 1j * one()
    return v


def random_function(grid: GridSpec, rng: np.random.Generator, kind: str | None = None,
                    **kw) -> GridFunction:
    if kind is None:
        kind = DISTRIBUTIONS[int(rng.integers(len(DISTRIBUTIONS)))]
    return GridFunction(grid, random_values(grid, rng, kind, **kw))


def cycled_function(grid: GridSpec, seed: int, suite: str, trial: int, **kw) -> GridFunction:
    """Trial ``t`` of a suite: distribution chosen round-robin, stream keyed by ``(suite, t)``."""
    kind = DISTRIBUTIONS[trial % len(DISTRIBUTIONS)]
    return random_function(grid, stream(seed, suite, trial), kind, **kw)


def adversarial_probes(grid: GridSpec) -> list[GridFunction]:
    """Deterministic probes: a single spike, cube indicators of dyadic sides,
    and the lowest Fourier modes."""
    probes = []
    spike = np.zeros(grid.shape)
    spike[(0,) * grid.dim] = 1.0
    probes.append(GridFunction(grid, spike))
    s = 2
    while s <= grid.max_cube_side:
        flat = np.zeros(grid.shape)
        cube = Cube(s, (0,) * grid.dim)
        for cell in cube.cells(grid):
            flat[cell] = 1.0
        probes.append(GridFunction(grid, flat))
        s *= 2
    coords = np.meshgrid(*[np.arange(n) / n for n in grid.sides], indexing="ij")
    probes.append(GridFunction(grid, np.cos(2 * np.pi * coords[0])))
    probes.append(GridFunction(grid, np.sin(2 * np.pi * coords[-1])))
    return probes

