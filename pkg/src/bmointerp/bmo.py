"""BMO seminorm, level-set oscillation tests and the behaviour of oscillation
under contractions and powers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bmointerp import kernels
from bmointerp.grid import Cube, GridFunction, GridSpec, cube_windows, iter_cubes, pad_for_side
from bmointerp.maximal import sharp_maximal


def bmo_norm(f: GridFunction, *, workers: int = 1) -> float:
    """``max f#``; a seminorm vanishing on constants."""
    return float(sharp_maximal(f, workers=workers).values.max())


def oscillation_witness(f: GridFunction) -> tuple[Cube, float]:
    """A cube attaining ``bmo_norm(f)``.

    Only cubes through the cell where ``f#`` peaks are scanned.
    """
    g = f.grid
    peak = np.unravel_index(int(np.argmax(sharp_maximal(f).values)), g.shape)
    best, best_q = -1.0, None
    for s in range(1, g.max_cube_side + 1):
        # cubes of side s containing peak have anchors peak - s + 1 .. peak
        lo = [p - s + 1 for p in peak]
        if g.torus:
            idx = np.ix_(*[np.arange(l, l + 2 * s - 1) % n for l, n in zip(lo, g.sides)])
            block = f.values[idx]
        else:
            padded = pad_for_side(f.values, s, False)  # cell k sits at k + s - 1
            block = padded[tuple(slice(l + s - 1, l + 3 * s - 2) for l in lo)]
        win = cube_windows(block, s, True)[(slice(0, s),) * g.dim]
        flat = win.reshape(win.shape[:g.dim] + (-1,))
        osc = np.abs(flat - flat.mean(axis=-1, keepdims=True)).mean(axis=-1)
        k = np.unravel_index(int(np.argmax(osc)), osc.shape)
        if osc[k] > best:
            anchor = tuple(l + int(i) for l, i in zip(lo, k))
            if g.torus:
                anchor = tuple(a % n for a, n in zip(anchor, g.sides))
            best, best_q = float(osc[k]), Cube(s, anchor)
    return best_q, best


def min_exceedance_counts(f: GridFunction, lam: float) -> np.ndarray:
    """Per cube, in cube-family order: ``min_c #{x in Q : |f(x) - c| > lam}``.

    Exact: the best ``c`` centres a closed window of width ``2 lam`` on as many
    sorted cube values as possible.
    """
    if f.is_complex:
        raise TypeError("level-set counts are defined for real functions")
    g = f.grid
    return np.asarray(kernels.impl.min_exceedance(kernels.as2d(f.values, g.dim), g.dim,
                                                  g.max_cube_side, g.torus, float(lam)))


def _cube_sizes(grid: GridSpec) -> np.ndarray:
    return np.array([q.side ** grid.dim for q in iter_cubes(grid)], dtype=float)


@dataclass
class StrombergResult:
    passed: bool
    worst_fraction: float
    witness: Cube | None
    lam: float
    gamma: float

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        return {"passed": self.passed, "worst_fraction": self.worst_fraction,
                "witness": None if self.witness is None else
                {"side": self.witness.side, "anchor": list(self.witness.anchor)},
                "lambda": self.lam, "gamma": self.gamma}


def stromberg_test(f: GridFunction, lam: float, gamma: float) -> StrombergResult:
    """Check ``min_c |{x in Q : |f - c| > lam}| <= gamma |Q|`` on every cube."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not 0 < gamma < 0.5:
        raise ValueError("gamma must lie in (0, 1/2)")
    frac = min_exceedance_counts(f, lam) / _cube_sizes(f.grid)
    k = int(np.argmax(frac))
    worst = float(frac[k])
    passed = worst <= gamma
    witness = None if passed else next(q for i, q in enumerate(iter_cubes(f.grid)) if i == k)
    return StrombergResult(passed, worst, witness, lam, gamma)


class ContractionMap:
    name = "contraction"

    def check_domain(self, values: np.ndarray) -> None:
        pass

    def __call__(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"name": self.name}


class IdentityMap(ContractionMap):
    name = "identity"

    def __call__(self, y):
        return np.asarray(y, dtype=float)


@dataclass
class PowerMap(ContractionMap):
    """``y -> y^alpha`` on ``y >= 1``; 1-Lipschitz there since the slope is ``alpha y^(alpha-1) <= 1``."""
    alpha: float
    name = "power"

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")

    def check_domain(self, values):
        if np.any(values < 1):
            raise ValueError("the power map is a contraction on y >= 1 only")

    def __call__(self, y):
        return np.asarray(y, dtype=float) ** self.alpha

    def to_dict(self):
        return {"name": self.name, "alpha": self.alpha}


@dataclass
class ClipMap(ContractionMap):
    """``y -> min(y, K)``."""
    K: float
    name = "clip"

    def __call__(self, y):
        return np.minimum(np.asarray(y, dtype=float), self.K)

    def to_dict(self):
        return {"name": self.name, "K": self.K}


def contraction_oscillation_check(f: GridFunction, F: ContractionMap, lam: float) -> bool:
    """Whether ``min_c #{|F(f) - c| > lam} <= min_c #{|f - c| > lam}`` on every cube.

    Both minima are exact over real ``c``.  On ``zero_extend`` grids the
    padding of ``F(f)`` carries ``F(0)``.  For the catalog maps the optimum
    on the left is attained inside the range of ``F``, so restricting the
    centre to ``F``-images changes nothing.
    """
    if not isinstance(F, (IdentityMap, PowerMap, ClipMap)):
        raise TypeError(f"map {F!r} is not in the contraction catalog")
    if f.is_complex:
        raise TypeError("real functions only")
    F.check_domain(f.values)
    mapped = F(f.values)
    if not f.grid.torus:
        # zero padding of f maps to F(0); counts ignore a common shift, so pad F(f) - F(0) with 0
        mapped = mapped - F(np.zeros(1))[0]
    lhs = min_exceedance_counts(GridFunction(f.grid, mapped), lam)
    rhs = min_exceedance_counts(f, lam)
    return bool(np.all(lhs <= rhs))


def power_bmo_report(f: GridFunction, alpha: float) -> dict:
    """Oscillation of ``f^alpha`` split as ``(f v 1)^alpha`` plus a part bounded by 1."""
    if f.is_complex or np.any(f.values < 0):
        raise ValueError("power_bmo_report needs a nonnegative real function")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    g = f.grid
    fa = GridFunction(g, f.values ** alpha)
    top = GridFunction(g, np.maximum(f.values, 1.0) ** alpha)
    n_f, n_fa, n_top = bmo_norm(f), bmo_norm(fa), bmo_norm(top)
    witness, _ = oscillation_witness(fa)
    return {
        "alpha": alpha,
        "bmo_f": n_f,
        "bmo_f_alpha": n_fa,
        "bmo_top_alpha": n_top,
        "bound": n_top + 2.0,
        "holds": bool(n_fa <= n_top + 2.0),
        "ratio": n_fa / n_f if n_f > 0 else None,
        "witness": {"side": witness.side, "anchor": list(witness.anchor)},
        "grid_digest": g.digest(),
    }
