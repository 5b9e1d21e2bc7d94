"""Analytic families on the strip ``0 <= Re z <= 1`` and the interpolation
bounds built from them.

Families
--------
* ``PowerFamily``: ``f_z = u g0^(1-z) g1^z``.  Powers of zero follow
  ``0^w = 0`` for ``Re w > 0`` and ``0^w = 1`` for ``Re w = 0``.
* ``QuotientFamily``: ``F_{z,j} = (f_j / F) f_z`` with ``F = sup_j |f_j|`` and
  ``0/0 = 0``.
* ``CubeFamily``: for cubes ``Q_j`` through the origin,
  ``g_{z,j}(x) = avg_{Q_j+x} (f_z - avg f_z) conj(s)`` where ``s`` is the unit
  sign of ``f_theta - avg f_theta`` (zero where that difference vanishes).
  At ``z = theta`` its supremum over ``j`` is the sharp maximal function of
  ``f_theta``.

The moduli of power families do not depend on ``Im z``, so their boundary
norms are computed once.  Cube families are sampled on ``T_GRID``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from bmointerp import kernels
from bmointerp.grid import Cube, GridFunction, GridSpec, cube_windows
from bmointerp.lattices import (LatticeSpec, Lp, Power, SeqGridFunction,
                                calderon_factorization, calderon_norm, norm)
from bmointerp.maximal import _by_sides, maximal, sharp_maximal
from bmointerp.sampling import adversarial_probes, cycled_function, stream

T_GRID = (0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0)
CHAIN_RTOL = 1e-12


class StripError(ValueError):
    pass


@dataclass(frozen=True)
class StripPoint:
    sigma: float
    t: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.sigma <= 1.0:
            raise StripError(f"Re z = {self.sigma} lies off the strip [0, 1]")

    @classmethod
    def of(cls, z) -> "StripPoint":
        if isinstance(z, StripPoint):
            return z
        z = complex(z)
        return cls(z.real, z.imag)

    @property
    def z(self) -> complex:
        return complex(self.sigma, self.t)


def _zero_power(g: np.ndarray, w: complex) -> np.ndarray:
    """``g ** w`` for ``g >= 0`` with ``0^w = 0`` (Re w > 0), ``0^w = 1`` (Re w = 0)."""
    pos = g > 0
    out = np.zeros(g.shape, dtype=complex)
    out[pos] = np.exp(w * np.log(g[pos]))
    if w.real == 0:
        out[~pos] = 1.0
    return out


@dataclass
class PowerFamily:
    u: GridFunction
    g0: GridFunction
    g1: GridFunction

    def __post_init__(self):
        for g in (self.g0, self.g1):
            if g.is_complex or np.any(g.values < 0):
                raise StripError("g0 and g1 must be nonnegative")
        mag = np.abs(self.u.values)
        if np.any((mag > 0) & (np.abs(mag - 1) > 1e-12)):
            raise StripError("u must be unimodular (or zero)")

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    def eval(self, z) -> GridFunction:
        w = StripPoint.of(z).z
        vals = self.u.values * _zero_power(self.g0.values, 1 - w) * _zero_power(self.g1.values, w)
        return GridFunction(self.grid, vals)

    def modulus(self, j: int) -> np.ndarray:
        """``|f_{j + it}|``, the same for every ``t``."""
        return np.abs(self.u.values) * (self.g0 if j == 0 else self.g1).values


@dataclass
class QuotientFamily:
    weights: SeqGridFunction
    base: PowerFamily

    def __post_init__(self):
        if np.any(np.abs(self.weights.values) > 1 + 1e-12):
            raise StripError("quotient weights must satisfy |w_j| <= 1")

    @property
    def grid(self) -> GridSpec:
        return self.base.grid

    def eval(self, z) -> SeqGridFunction:
        return SeqGridFunction(self.grid, self.weights.values * self.base.eval(z).values[None])

    def modulus(self, j: int) -> np.ndarray:
        return np.abs(self.weights.values) * self.base.modulus(j)[None]


def origin_cubes(grid: GridSpec) -> list[Cube]:
    """All cubes of the family that contain the origin cell."""
    out = []
    for s in range(1, grid.max_cube_side + 1):
        offs = np.arange(-(s - 1), 1)
        if grid.dim == 1:
            out += [Cube(s, (int(a),)) for a in offs]
        else:
            out += [Cube(s, (int(a), int(b))) for a in offs for b in offs]
    return out


@dataclass
class CubeFamily:
    base: PowerFamily
    cubes: list[Cube]
    theta: float
    full: bool = field(default=False)

    def __post_init__(self):
        g = self.base.grid
        for q in self.cubes:
            if q.side > g.max_cube_side:
                raise StripError(f"cube side {q.side} exceeds the grid's max_cube_side")
            if any(not (-(q.side - 1) <= a <= 0) for a in q.anchor):
                raise StripError(f"{q} does not contain the origin")

    @property
    def grid(self) -> GridSpec:
        return self.base.grid

    def _anchor_values(self, fz: np.ndarray, ft: np.ndarray, s: int) -> np.ndarray:
        # value of g for the translate with anchor A, indexed like cube_windows
        g = self.grid
        wz = cube_windows(fz, s, g.torus)
        wt = cube_windows(ft, s, g.torus)
        shp = wz.shape[:g.dim] + (-1,)
        wz, wt = wz.reshape(shp), wt.reshape(shp)
        dz = wz - wz.mean(axis=-1, keepdims=True)
        dt = wt - wt.mean(axis=-1, keepdims=True)
        mag = np.abs(dt)
        sign = np.divide(np.conj(dt), mag, out=np.zeros_like(dt), where=mag > 0)
        return (dz * sign).mean(axis=-1)

    def eval(self, z) -> SeqGridFunction:
        """Every ``g_{z,j}`` (one entry per cube, in list order)."""
        g = self.grid
        fz = self.base.eval(z).values.astype(complex)
        ft = self.base.eval(self.theta).values.astype(complex)
        cache = {}
        out = np.empty((len(self.cubes),) + g.shape, dtype=complex)
        idx = np.meshgrid(*[np.arange(n) for n in g.sides], indexing="ij")
        for j, q in enumerate(self.cubes):
            if q.side not in cache:
                cache[q.side] = self._anchor_values(fz, ft, q.side)
            G = cache[q.side]
            # translate Q_j + x has anchor x + offset
            pos = []
            for ax, (a, n) in enumerate(zip(q.anchor, g.sides)):
                p = idx[ax] + a
                pos.append(p % n if g.torus else p + q.side - 1)
            out[j] = G[tuple(pos)]
        return SeqGridFunction(g, out)

    def sup_abs(self, z, *, workers: int = 1) -> GridFunction:
        """``sup_j |g_{z,j}|``."""
        return self.sup_abs_many([z], workers=workers)[0]

    def sup_abs_many(self, zs, *, workers: int = 1) -> list[GridFunction]:
        """``sup_j |g_{z,j}|`` for several ``z`` in one pass over the cubes."""
        g = self.grid
        if not self.full:
            return [self.eval(z).sup_abs() for z in zs]
        fz = np.stack([kernels.as2d(self.base.eval(z).values, g.dim, complex) for z in zs])
        ft = kernels.as2d(self.base.eval(self.theta).values, g.dim, complex)
        zr, zi = np.ascontiguousarray(fz.real), np.ascontiguousarray(fz.imag)
        tr, ti = np.ascontiguousarray(ft.real), np.ascontiguousarray(ft.imag)
        vals = _by_sides(lambda lo, hi: kernels.impl.gfamily_sup(zr, zi, tr, ti, g.dim, hi,
                                                                 g.torus, lo),
                         g.max_cube_side, workers)
        return [GridFunction(g, v.reshape(g.shape)) for v in np.asarray(vals)]


def family_eval(fam, z):
    return fam.eval(StripPoint.of(z))


def boundary_norms(fam, X0: LatticeSpec, X1: LatticeSpec, t_samples=T_GRID) -> tuple[float, float]:
    """``(sup_t ||f_{it}||_X0, sup_t ||f_{1+it}||_X1)``; mixed norms for sequence families."""
    t_samples = tuple(t_samples)
    if not t_samples:
        raise ValueError("need at least one t sample")
    g = fam.grid
    h = g.cell_measure
    if isinstance(fam, PowerFamily):
        return (float(X0.norm_values(fam.modulus(0), h)), float(X1.norm_values(fam.modulus(1), h)))
    if isinstance(fam, QuotientFamily):
        return (float(X0.norm_values(fam.modulus(0).max(axis=0), h)),
                float(X1.norm_values(fam.modulus(1).max(axis=0), h)))
    if isinstance(fam, CubeFamily):
        b0 = max(norm(X0, fam.sup_abs(complex(0, t))) for t in t_samples)
        b1 = max(norm(X1, fam.sup_abs(complex(1, t))) for t in t_samples)
        return float(b0), float(b1)
    raise TypeError(f"unknown family {type(fam).__name__}")


def _sign(a: np.ndarray) -> np.ndarray:
    """Unit phase of ``a``, 1 where ``a`` vanishes (``a / |a|`` overflows on complex subnormals)."""
    if np.iscomplexobj(a):
        return np.where(a != 0, np.exp(1j * np.angle(a)), 1.0 + 0j)
    return np.where(a != 0, np.sign(a), 1.0)


@dataclass
class InterpolationBound:
    value: float
    family: PowerFamily
    boundary: tuple[float, float]


def interp_norm_upper(a: GridFunction, X0: LatticeSpec, X1: LatticeSpec, theta: float,
                      tol: float = 1e-12) -> InterpolationBound:
    """Calderon-product norm of ``a`` with an admissible family attaining it.

    The factorization is rebalanced so that both boundary norms equal the value.
    """
    res = calderon_factorization(X0, X1, theta, a, tol)
    g0, g1 = res.g0, res.g1
    # shrink to |a| = g0^(1-theta) g1^theta exactly; norms only drop in a lattice
    mag = np.abs(a.values)
    prod = g0 ** (1 - theta) * g1 ** theta
    r = np.divide(mag, prod, out=np.zeros(mag.shape), where=prod > 0)
    g0, g1 = g0 * r, g1 * r
    h = a.grid.cell_measure
    b0, b1 = X0.norm_values(g0, h), X1.norm_values(g1, h)
    if b0 > 0 and b1 > 0:
        lam = b1 / b0
        g0, g1 = g0 * lam ** theta, g1 * lam ** (theta - 1)
    u = _sign(a.values.astype(complex) if a.is_complex else a.values)
    fam = PowerFamily(GridFunction(a.grid, u), GridFunction(a.grid, g0), GridFunction(a.grid, g1))
    return InterpolationBound(res.value, fam, boundary_norms(fam, X0, X1))


def interp_norm_lower(a: GridFunction, X0: LatticeSpec, X1: LatticeSpec, theta: float,
                      trials: int = 8, seed: int = 0) -> float:
    """``max_b |<a, b>| / ||b||`` in the product of the duals.

    The deterministic probe is the gradient of the product norm at ``a``,
    which norms ``a`` exactly when the duality is exact; the rest are seeded.
    """
    vals = a.values
    if not np.any(vals):
        return 0.0
    g, h = a.grid, a.grid.cell_measure
    mag = np.abs(vals)
    conj_sign = np.conj(_sign(vals.astype(complex)))
    D0, D1 = X0.dual(), X1.dual()
    probes = []
    res = calderon_factorization(X0, X1, theta, a)
    grad = np.divide(res.value * res.elasticity, mag * h, out=np.zeros(g.shape), where=mag > 0)
    probes.append(grad)
    rng = stream(seed, "interp_lower")
    for k in range(trials):
        if k % 2 == 0:
            probes.append(mag ** rng.uniform(0.0, 3.0))
        else:
            probes.append(rng.lognormal(0.0, 1.0, size=g.shape) * (mag > 0))
    best = 0.0
    for b in probes:
        if not np.any(b):
            continue
        pair = abs(np.sum(vals * b * conj_sign) * h)
        dn = calderon_norm(D0, D1, theta, GridFunction(g, b))
        if dn > 0:
            best = max(best, float(pair / dn))
    return best


def infint_family(fs: SeqGridFunction, X0: LatticeSpec, X1: LatticeSpec, theta: float,
                  tol: float = 1e-12) -> QuotientFamily:
    """Quotient family through ``fs`` at ``theta`` built on the family of ``sup_j |f_j|``."""
    F = np.abs(fs.values).max(axis=0)
    Fg = GridFunction(fs.grid, F)
    base = interp_norm_upper(Fg, X0, X1, theta, tol).family
    # f_theta of the base is F up to rounding; pin it so the slice reproduces fs
    w = np.divide(fs.values, F[None], out=np.zeros(fs.values.shape, dtype=fs.values.dtype),
                  where=F[None] > 0)
    return QuotientFamily(SeqGridFunction(fs.grid, w), base)


def bintt_gfamily(base: PowerFamily, cubes: list[Cube] | None, theta: float) -> CubeFamily:
    """The cube family of ``base``; ``cubes=None`` means every cube through the origin."""
    if not 0 < theta < 1:
        raise StripError("theta must lie in (0, 1)")
    full = cubes is None
    if full:
        cubes = origin_cubes(base.grid)
    return CubeFamily(base, list(cubes), theta, full)


# --- sharp domination ----------------------------------------------------------

def _mean_zero(f: GridFunction) -> GridFunction:
    return GridFunction(f.grid, f.values - f.values.mean())


def sharp_domination_ratio(X: LatticeSpec, f: GridFunction) -> float | None:
    """``||f||_X / ||f#||_X``, or None when ``f#`` vanishes."""
    den = norm(X, sharp_maximal(f))
    if den == 0:
        return None
    return norm(X, f) / den


def sharp_domination_ratios(X: LatticeSpec, grid: GridSpec, trials: int = 20, seed: int = 0,
                            workers: int = 1) -> list[float]:
    """Ratios on mean-zero real functions: adversarial probes first, then seeded trials."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not grid.torus:
        raise ValueError("sharp-domination calibration runs on the torus")
    fs = [_mean_zero(p) for p in adversarial_probes(grid)]
    fs += [_mean_zero(cycled_function(grid, seed, "sharp_domination", t, signed=True))
           for t in range(trials)]
    fs = [f for f in fs if np.any(np.abs(f.values) > 1e-12 * np.abs(f.values).max(initial=0))]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ratios = list(pool.map(lambda f: sharp_domination_ratio(X, f), fs))
    else:
        ratios = [sharp_domination_ratio(X, f) for f in fs]
    return [r for r in ratios if r is not None]


def sharp_domination_calibrate(X: LatticeSpec, grid: GridSpec, trials: int = 20, seed: int = 0,
                               workers: int = 1) -> float:
    """Empirical ``c`` in ``||f||_X <= c ||f#||_X`` for real mean-zero ``f``.

    For complex ``f`` use ``2 c`` (split into real and imaginary parts).
    """
    return float(max(sharp_domination_ratios(X, grid, trials, seed, workers)))


# --- the chain of estimates ------------------------------------------------------

@dataclass
class ChainReport:
    margins: dict
    passed: bool
    status: str
    violations: dict
    details: dict

    def to_dict(self) -> dict:
        return {"margins": self.margins, "passed": self.passed, "status": self.status,
                "violations": self.violations, "details": self.details}


def bintt_chain_check(a: GridFunction, X: LatticeSpec, theta: float, t_grid=T_GRID,
                      tol: float = 1e-12, c: float | None = None, *,
                      workers: int = 1) -> ChainReport:
    """Evaluate the four estimates of the cube-family argument for ``a``.

    Margins are ``max(lhs / rhs) - 1`` (nonpositive when an inequality holds)
    for (i), (ii), (iv) and the largest absolute deviation for (iii).  ``c``
    is the calibrated sharp-domination constant of ``Power(X, theta)``; without
    it (iv) is reported as "calibrate first".
    """
    g = a.grid
    if not g.torus:
        raise ValueError("the chain check runs on the torus")
    a = _mean_zero(a)
    t_grid = tuple(t_grid)
    margins = {"i": -1.0, "ii": -1.0, "iii": 0.0, "iv": None}
    violations = {"i": 0, "ii": 0, "iii": 0, "iv": 0}
    details: dict = {"theta": theta, "t_grid": list(t_grid), "grid_digest": g.digest()}
    if not np.any(a.values):
        margins["iv"] = -1.0 if c is not None else None
        status = "ok" if c is not None else "calibrate first"
        return ChainReport(margins, c is not None, status, violations, details)

    fam = interp_norm_upper(a, Lp(np.inf), X, theta, tol).family
    cf = bintt_gfamily(fam, None, theta)

    def ratio(lhs, rhs):
        pos = rhs > 0
        bad = (~pos) & (lhs > 0)
        r = np.where(pos, lhs / np.where(pos, rhs, 1.0), np.where(bad, np.inf, 0.0))
        return float(r.max()) - 1.0, int(np.sum(lhs > rhs * (1 + CHAIN_RTOL)))

    zs = [complex(0, t) for t in t_grid] + [complex(1, t) for t in t_grid] + [theta]
    sups = cf.sup_abs_many(zs, workers=workers)
    nt = len(t_grid)
    for k, t in enumerate(t_grid):
        f0 = fam.eval(complex(0, t))
        s0 = sups[k].values
        sh0 = sharp_maximal(f0, workers=workers).values
        m_a, v_a = ratio(s0, sh0)
        m_b, v_b = ratio(sh0, np.full(g.shape, sh0.max()))
        margins["i"] = max(margins["i"], m_a, m_b)
        violations["i"] += v_a + v_b
        s1 = sups[nt + k].values
        m, v = ratio(s1, 2.0 * maximal(fam.eval(complex(1, t)).abs()).values)
        margins["ii"] = max(margins["ii"], m)
        violations["ii"] += v
    gt = sups[-1].values
    ash = sharp_maximal(a, workers=workers).values
    dev = float(np.max(np.abs(gt - ash)))
    margins["iii"] = dev
    violations["iii"] = int(np.sum(np.abs(gt - ash) > CHAIN_RTOL * max(1.0, float(ash.max()))))
    P = Power(X, theta)
    lhs, rhs = norm(P, a), norm(P, GridFunction(g, ash))
    details.update({"power_norm": lhs, "power_norm_sharp": rhs,
                    "ratio": lhs / rhs if rhs > 0 else None, "c": c,
                    "complex": a.is_complex})
    if c is None:
        status = "calibrate first"
    else:
        cc = 2.0 * c if a.is_complex else c
        margins["iv"] = lhs / (cc * rhs) - 1.0
        violations["iv"] = int(lhs > cc * rhs * (1 + CHAIN_RTOL))
        status = "ok"
    passed = c is not None and not any(violations.values())
    return ChainReport(margins, passed, status, violations, details)


# --- exponent arithmetic ---------------------------------------------------------

def wolff_exponents(gamma: float, delta: float) -> tuple[float, float]:
    if not (0 < gamma < 1 and 0 < delta < 1):
        raise ValueError("gamma and delta must lie in (0, 1)")
    den = 1.0 - delta + gamma * delta
    return gamma * delta / den, gamma / den


def wolff_instantiation(theta: float, alpha: float) -> tuple[float, float]:
    """``(delta, gamma)`` gluing ``(BMO, X^alpha)`` and ``(X^theta, X)`` for ``theta < alpha``."""
    if not 0 < theta < alpha < 1:
        raise ValueError("need 0 < theta < alpha < 1")
    return theta / alpha, (alpha - theta) / (1.0 - theta)


def reiteration_exponent(alpha: float, eta: float) -> float:
    if not (0 < alpha < 1 and 0 <= eta <= 1):
        raise ValueError("need 0 < alpha < 1 and 0 <= eta <= 1")
    return (1.0 - eta) * alpha + eta


def reiteration_eta(theta: float, alpha: float) -> float:
    if not 0 < alpha <= theta < 1:
        raise ValueError("need 0 < alpha <= theta < 1")
    return (theta - alpha) / (1.0 - alpha)
