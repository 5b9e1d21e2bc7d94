"""Muckenhoupt weights on a grid: A_1 and A_p constants, Rubio de Francia
majorants, powers of maximal functions and the majorant used for products
with L^1.

A_p and reverse Holder characteristics on ``zero_extend`` grids only use cubes
that lie inside the grid (a weight is undefined on the padding); A_1 uses the
grid's maximal operator as is.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bmointerp.grid import GridFunction, GridSpec, cube_means
from bmointerp.lattices import CalderonProduct, LatticeSpec, Lp, conjugate_exponent, norm
from bmointerp.maximal import hl_maximal, maximal
from bmointerp.sampling import adversarial_probes, cycled_function

RH_LADDER = tuple(np.round(np.arange(1.05, 4.0 + 1e-9, 0.05), 2))


class WeightError(ValueError):
    pass


class NonContractingSeriesError(RuntimeError):
    pass


@dataclass
class Weight:
    w: GridFunction

    def __post_init__(self):
        if self.w.is_complex:
            raise WeightError("weights are real")
        if np.any(self.w.values <= 0):
            raise WeightError("weights must be strictly positive")

    @classmethod
    def from_values(cls, grid: GridSpec, values) -> "Weight":
        return cls(GridFunction(grid, values))

    @property
    def grid(self) -> GridSpec:
        return self.w.grid

    @property
    def values(self) -> np.ndarray:
        return self.w.values

    def inverse(self) -> "Weight":
        return Weight(GridFunction(self.grid, 1.0 / self.values))

    def to_dict(self) -> dict:
        return self.w.to_dict()


def as_weight(w) -> Weight:
    return w if isinstance(w, Weight) else Weight(w)


def power_weight(grid: GridSpec, beta: float = 0.5) -> Weight:
    """``max(|x - centre| h, h) ** beta``."""
    h = grid.spacing
    coords = np.meshgrid(*[np.arange(n) - n / 2 for n in grid.sides], indexing="ij")
    r = np.sqrt(sum(c ** 2 for c in coords)) * h
    return Weight.from_values(grid, np.maximum(r, h) ** beta)


@dataclass
class A1Certificate:
    majorant: Weight
    a1_constant: float
    majorized: GridFunction
    norm_ratio: float | None
    parameters: dict = field(default_factory=lambda: {"q": None, "alpha": None, "p": None})
    terms: int = 0
    holder_margin: float | None = None

    def to_dict(self) -> dict:
        return {"constant": self.a1_constant, "norm_ratio": self.norm_ratio,
                "parameters": {k: self.parameters.get(k) for k in ("q", "alpha", "p")},
                "grid_digest": self.majorant.grid.digest()}


def a1_constant(w, *, workers: int = 1) -> float:
    """``max Mw / w``."""
    w = as_weight(w)
    v = w.values
    if np.all(v == v.flat[0]):
        return 1.0
    mw = hl_maximal(w.w, workers=workers) if workers > 1 else maximal(w.w)
    return max(1.0, float(np.max(mw.values / v)))


def ap_constant(w, p: float) -> float:
    """``sup_Q avg_Q(w) * avg_Q(w^(1/(1-p)))^(p-1)``."""
    if not p > 1 or np.isinf(p):
        raise WeightError(f"A_p needs 1 < p < inf, got {p}")
    w = as_weight(w)
    g = w.grid
    v = w.values / w.values.max()  # scale invariant; keeps the dual power in range
    dual = v ** (1.0 / (1.0 - p))
    best = 1.0
    for s in range(1, g.max_cube_side + 1):
        a = cube_means(v, s, g.torus, interior=True)
        b = cube_means(dual, s, g.torus, interior=True)
        best = max(best, float(np.max(a * b ** (p - 1.0))))
    return best


def _rh_holds(v: np.ndarray, grid: GridSpec, r: float, C: float) -> bool:
    vr = v ** r
    for s in range(1, grid.max_cube_side + 1):
        lhs = cube_means(vr, s, grid.torus, interior=True) ** (1.0 / r)
        rhs = C * cube_means(v, s, grid.torus, interior=True)
        if np.any(lhs > rhs * (1 + 1e-12)):
            return False
    return True


def reverse_holder_exponent(w, C: float) -> float | None:
    """Largest ladder exponent ``r`` with ``avg(w^r)^(1/r) <= C avg(w)`` on
    every cube, or None."""
    w = as_weight(w)
    v = w.values / w.values.max()
    # power means grow with r, so the valid rungs form a prefix
    lo, hi = -1, len(RH_LADDER)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _rh_holds(v, w.grid, RH_LADDER[mid], C):
            lo = mid
        else:
            hi = mid
    return None if lo < 0 else float(RH_LADDER[lo])


def m_operator_norm_probe(X: LatticeSpec, grid: GridSpec, trials: int = 20, seed: int = 0) -> float:
    """Lower estimate of ``||M||_{X -> X}`` over seeded and adversarial probes."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    probes = adversarial_probes(grid)
    probes += [cycled_function(grid, seed, "m_probe", t) for t in range(trials)]
    best = 0.0
    for f in probes:
        nf = norm(X, f)
        if nf > 0:
            best = max(best, norm(X, maximal(f.abs())) / nf)
    return best


def rubio_majorant(f: GridFunction, X: LatticeSpec, m_norm: float, eps: float = 1e-6,
                   max_terms: int = 64) -> A1Certificate:
    """``w = sum_k M^k |f| / (2 m)^k``, truncated at the first ``K`` whose next
    term is at most ``eps * w`` everywhere."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if m_norm <= 0:
        raise ValueError("m_norm must be positive")
    term = np.abs(f.values).astype(float)
    if not term.any():
        raise WeightError("f vanishes identically; no positive majorant")
    h = f.grid
    w = term.copy()
    prev = norm(X, GridFunction(h, term))
    for k in range(1, max_terms + 1):
        term = maximal(GridFunction(h, term)).values / (2.0 * m_norm)
        if np.all(term <= eps * w):
            break
        cur = norm(X, GridFunction(h, term))
        if prev > 0 and cur > 0.9 * prev:
            raise NonContractingSeriesError(
                f"series terms do not contract (ratio {cur / prev:.3g} > 0.9 at term {k}); "
                f"m_norm={m_norm:g} is below the operator norm; use a larger m_norm")
        w += term
        prev = cur
    else:
        raise NonContractingSeriesError(
            f"series did not reach eps={eps:g} within {max_terms} terms; use a larger m_norm")
    if np.any(w <= 0):
        raise WeightError("majorant is not strictly positive (cube family too small to spread f)")
    weight = Weight(GridFunction(h, w))
    return A1Certificate(weight, a1_constant(weight), f, norm(X, weight.w) / norm(X, f), terms=k)


def verify_rubio_certificate(cert: A1Certificate, X: LatticeSpec, m_norm: float,
                             eps: float) -> dict:
    """Direct evaluation of the three certificate inequalities."""
    w = cert.majorant.values
    mw = maximal(cert.majorant.w).values
    bound = 2.0 * m_norm * (1.0 + eps) * w
    return {
        "majorizes": bool(np.all(w >= np.abs(cert.majorized.values))),
        "norm_ratio": cert.norm_ratio,
        "norm_ratio_ok": bool(cert.norm_ratio <= 2.0 * (1 + 1e-12)),
        "maximal_ratio": float(np.max(mw / (2.0 * m_norm * w))),
        "maximal_ok": bool(np.all(mw <= bound * (1 + 1e-12))),
    }


def a1_power_check(f: GridFunction, q: float, *, workers: int = 1) -> tuple[Weight, float]:
    """``w = (Mf)^q`` and its A_1 constant."""
    if not 0 < q < 1:
        raise WeightError(f"q must lie in (0, 1), got {q}")
    if not np.any(f.values):
        raise WeightError("f vanishes identically")
    mf = maximal(f.abs()).values
    if np.any(mf <= 0):
        raise WeightError("Mf vanishes somewhere (cube family too small)")
    # scale out |f| so that the constant is exactly invariant under f -> cf
    w = Weight(GridFunction(f.grid, (mf / mf.max()) ** q))
    return w, a1_constant(w, workers=workers)


def a1_power_curve(grid: GridSpec, qs, trials: int = 20, seed: int = 0) -> dict[float, float]:
    """Empirical ``C(q)``: the largest A_1 constant of ``(Mf)^q`` over seeded
    and adversarial ``f``, made nondecreasing in ``q`` by a running max."""
    fs = adversarial_probes(grid) + [cycled_function(grid, seed, "a1_power", t) for t in range(trials)]
    # with a restricted cube family some probes have Mf = 0 somewhere; (Mf)^q is then no weight
    fs = [f for f in fs if np.all(maximal(f.abs()).values > 0)]
    raw = {float(q): max(a1_power_check(f, q)[1] for f in fs) for q in sorted(qs)}
    out, run = {}, 1.0
    for q in sorted(raw):
        run = max(run, raw[q])
        out[q] = run
    return out


def a1interp_parameters(theta: float, q: float) -> dict:
    """Midpoints of the admissible windows for ``alpha`` and ``p``."""
    if not (0 < theta < 1 and 0 < q < 1):
        raise WeightError("theta and q must lie in (0, 1)")
    a_lo = theta / (1.0 - q * (1.0 - theta))
    alpha = 0.5 * (a_lo + 1.0)
    p_lo, p_hi = alpha / (alpha - theta), 1.0 / (q * (1.0 - theta))
    if not (a_lo < alpha < 1 and p_lo < p_hi):
        raise WeightError(f"degenerate parameter window: alpha in ({a_lo!r}, 1), "
                          f"p in ({p_lo!r}, {p_hi!r})")
    return {"q": q, "alpha": alpha, "p": 0.5 * (p_lo + p_hi),
            "alpha_window": (a_lo, 1.0), "p_window": (p_lo, p_hi)}


def holder_split_margin(A: np.ndarray, B: np.ndarray, p: float, grid: GridSpec) -> float:
    """``max_Q avg(AB) / (avg(A^p)^(1/p) avg(B^p')^(1/p')) - 1`` over the cube family."""
    pp = conjugate_exponent(p)
    worst = -np.inf
    for s in range(1, grid.max_cube_side + 1):
        lhs = cube_means(A * B, s, grid.torus)
        rhs = cube_means(A ** p, s, grid.torus) ** (1 / p) * cube_means(B ** pp, s, grid.torus) ** (1 / pp)
        pos = rhs > 0
        if np.any(lhs[~pos] > 0):
            return np.inf
        if pos.any():
            worst = max(worst, float(np.max(lhs[pos] / rhs[pos])) - 1.0)
    return worst


def calderon_l1_majorant(g: GridFunction, h: GridFunction, theta: float, q: float,
                         a: GridFunction, X: LatticeSpec | None = None) -> A1Certificate:
    """A_1 majorant ``u = c (Ma)^(q(1-t)) (M |h|^alpha)^(t/alpha)`` of ``|g|^(1-t) |h|^t``.

    ``c`` is the smallest constant making ``u`` a majorant.  If ``X`` is given
    the norm ratio is taken in ``X^(1-t) L^1^t``.
    """
    prm = a1interp_parameters(theta, q)
    alpha, p = prm["alpha"], prm["p"]
    grid = g.grid
    if not (np.any(a.values) and np.any(h.values)):
        raise WeightError("a and h must not vanish identically")
    target = np.abs(g.values) ** (1 - theta) * np.abs(h.values) ** theta
    A = maximal(a.abs()).values ** (q * (1 - theta))
    B = maximal(GridFunction(grid, np.abs(h.values) ** alpha)).values ** (theta / alpha)
    base = A * B
    if np.any(base <= 0):
        raise WeightError("maximal functions vanish somewhere (cube family too small)")
    c = float(np.max(target / base))
    c = c if c > 0 else 1.0
    # c * base can round one ulp below the target at the argmax cell
    u = Weight(GridFunction(grid, np.maximum(c * base, target)))
    ratio = None
    if X is not None:
        prod = CalderonProduct(X, Lp(1.0), theta)
        maj = GridFunction(grid, target)
        den = norm(prod, maj)
        ratio = norm(prod, u.w) / den if den > 0 else None
    return A1Certificate(u, a1_constant(u), GridFunction(grid, target), ratio,
                         parameters={"q": q, "alpha": alpha, "p": p},
                         holder_margin=holder_split_margin(A, B, p, grid))


def ainf_inverse_check(w, p0: float, q: float) -> dict:
    """A_p0 constant of ``w`` and the A_(p0' q) constant of ``1/w``."""
    if not p0 > 1:
        raise WeightError("p0 must exceed 1")
    if not q > 1:
        raise WeightError("q must exceed 1")
    w = as_weight(w)
    exponent = conjugate_exponent(p0) * q
    return {"p0": p0, "q": q, "inverse_exponent": exponent,
            "ap_constant": ap_constant(w, p0),
            "inverse_ap_constant": ap_constant(w.inverse(), exponent),
            "grid_digest": w.grid.digest()}
