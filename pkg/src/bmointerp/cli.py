"""``verify``: seeded property suites, constant calibration and reports.

Exit codes: 0 all checks pass, 1 a check failed (or constants are missing),
2 invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import jsonschema
import numpy as np

from bmointerp import __version__
from bmointerp.bmo import (ClipMap, PowerMap, bmo_norm, contraction_oscillation_check,
                           power_bmo_report, stromberg_test)
from bmointerp.grid import GridError, GridFunction, GridSpec
from bmointerp.interpolation import (CHAIN_RTOL, T_GRID, bintt_chain_check, bintt_gfamily, boundary_norms,
                                     infint_family, interp_norm_lower, interp_norm_upper,
                                     reiteration_eta, reiteration_exponent,
                                     sharp_domination_ratios, wolff_exponents, wolff_instantiation)
from bmointerp.lattices import (ExponentFunction, LatticeError, Lp, Power, SeqGridFunction,
                                VarLp, WeightedLp, calderon_norm, dual_norm,
                                lozanovsky_duality_check, luxemburg_norm, norm,
                                numeric_dual_probe)
from bmointerp.maximal import (hl_maximal, hl_maximal_fast, local_sharp_maximal,
                               rearrangement, sharp_maximal)
from bmointerp.muckenhoupt import (a1_constant, a1_power_curve, a1interp_parameters,
                                   ap_constant, calderon_l1_majorant, m_operator_norm_probe,
                                   WeightError, rubio_majorant, verify_rubio_certificate)
from bmointerp.sampling import cycled_function

SUITES = ("maximal", "weights", "lattices", "bmo", "interpolation", "bintt-chain", "all")
CONSTANTS_FILE = "constants.json"
A1_QS = (0.25, 0.5, 0.75, 0.9)

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "suite", "config", "grid_digest", "checks", "passed",
                 "exit_code"],
    "properties": {
        "schema_version": {"const": 1},
        "suite": {"enum": list(SUITES)},
        "config": {"type": "object"},
        "grid_digest": {"type": "string"},
        "passed": {"type": "boolean"},
        "exit_code": {"enum": [0, 1]},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["suite", "name", "passed", "value", "threshold"],
                "properties": {
                    "suite": {"type": "string"},
                    "name": {"type": "string"},
                    "passed": {"type": "boolean"},
                    "value": {"type": ["number", "null"]},
                    "threshold": {"type": ["number", "null"]},
                    "witness": {},
                    "note": {"type": "string"},
                },
            },
        },
        "margins": {
            "type": "object",
            "required": ["i", "ii", "iii", "iv"],
            "properties": {k: {"type": ["number", "null"]} for k in ("i", "ii", "iii", "iv")},
        },
        "constants": {"type": ["object", "null"]},
        "seeds": {"type": "array", "items": {"type": "integer"}},
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class SuiteConfig:
    suite: str = "all"
    n: int = 64
    dim: int = 1
    smax: int | None = None
    boundary: str = "torus"
    lattice: str = "l2"
    theta: float = 0.5
    alpha: float = 0.5
    q: float = 0.5
    trials: int = 20
    seed: int = 0
    tol: float = 1e-12
    out: str = "verify_out"

    def grid(self) -> GridSpec:
        if self.n < 1:
            raise ConfigError(f"--n must be positive, got {self.n}")
        if self.trials < 1:
            raise ConfigError(f"--trials must be positive, got {self.trials}")
        if not 0 < self.theta < 1:
            raise ConfigError("--theta must lie in (0, 1)")
        if not 0 < self.alpha < 1:
            raise ConfigError("--alpha must lie in (0, 1)")
        if not 0 < self.q < 1:
            raise ConfigError("--q must lie in (0, 1)")
        if self.tol <= 0:
            raise ConfigError("--tol must be positive")
        sides = (self.n,) * self.dim
        return GridSpec(self.dim, sides, 1.0 / self.n, self.boundary, self.smax)


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    witness: object = None
    note: str = ""

    def __post_init__(self):
        if self.value is not None:
            self.value = float(self.value)
            if not math.isfinite(self.value):
                # a NaN or inf never counts as a pass
                self.note = (self.note + " non-finite value").strip()
                self.passed = False
                self.value = None
        self.passed = bool(self.passed)


# --- lattices from the command line ------------------------------------------

def two_valued_weight(grid: GridSpec, low: float = 1.0, high: float = 4.0) -> GridFunction:
    """``low`` on the first half of the first axis, ``high`` on the rest."""
    v = np.full(grid.shape, low)
    v[grid.sides[0] // 2:] = high
    return GridFunction(grid, v)


def parse_lattice(name: str, grid: GridSpec):
    """``l1``, ``l2``, ``l4``, ``linf``, ``lp:<p>``, ``wl2`` (two-valued A_1 weight),
    ``varp`` (exponent between 3/2 and 3)."""
    key = name.lower()
    if key == "linf":
        return Lp(np.inf)
    if key.startswith("lp:"):
        return Lp(float(key[3:]))
    if key in ("l1", "l2", "l3", "l4", "l6", "l8"):
        return Lp(float(key[1:]))
    if key == "wl2":
        return WeightedLp(2.0, two_valued_weight(grid))
    if key == "varp":
        x = np.meshgrid(*[np.arange(n) / n for n in grid.sides], indexing="ij")[0]
        return VarLp(ExponentFunction(grid, 2.25 + 0.75 * np.sin(2 * np.pi * x)))
    raise ConfigError(f"unknown lattice {name!r}")


def lattice_key(X) -> str:
    """Family name plus a hash of the full serialized lattice."""
    blob = json.dumps(X.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    return f"{X.to_dict()['family']}:{hashlib.sha256(blob).hexdigest()[:12]}"


# --- suites -------------------------------------------------------------------

def _rel(a, b):
    den = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(a - b) / den))


def suite_maximal(cfg: SuiteConfig, grid: GridSpec, ctx: dict) -> list[Check]:
    S = "maximal"
    worst = {k: -np.inf for k in ("fast", "dom", "sharp2M", "re", "subM", "subS", "hom", "lam")}
    wit = {}
    equi = True
    for t in range(cfg.trials):
        f = cycled_function(grid, cfg.seed, S, t, signed=True, complex_=(t % 2 == 1))
        g = cycled_function(grid, cfg.seed, S + "-pair", t, signed=True)
        af = f.abs()
        mf = hl_maximal(f).values
        sf = sharp_maximal(f).values
        vals = {
            "dom": float(np.max(af.values - mf)),
            "sharp2M": float(np.max(sf - 2 * mf)),
            "re": float(np.max(sharp_maximal(f.real()).values - sf)),
            "subM": float(np.max(hl_maximal(f + g).values - mf - hl_maximal(g).values)),
            "subS": float(np.max(sharp_maximal(f + g).values - sf - sharp_maximal(g).values)),
            "hom": _rel(hl_maximal(GridFunction(grid, -2.5 * f.values)).values, 2.5 * mf),
        }
        if grid.torus:
            vals["fast"] = _rel(hl_maximal_fast(f).values, mf)
        if not f.is_complex:
            vals["lam"] = float(np.max(0.25 * local_sharp_maximal(f, 0.25).values - sf))
        for k, v in vals.items():
            if v > worst[k]:
                worst[k], wit[k] = v, {"trial": t}
        r = rearrangement(f)
        equi &= bool(np.array_equal(np.sort(r.values), np.sort(af.values.ravel())))
    scale = 1e-12
    out = [
        Check(S, "Mf >= |f|", worst["dom"] <= 0, worst["dom"], 0.0, wit.get("dom")),
        Check(S, "f# <= 2 Mf", worst["sharp2M"] <= scale, worst["sharp2M"], scale, wit.get("sharp2M")),
        Check(S, "(Re f)# <= f#", worst["re"] <= scale, worst["re"], scale, wit.get("re")),
        Check(S, "M subadditive", worst["subM"] <= scale, worst["subM"], scale, wit.get("subM")),
        Check(S, "sharp subadditive", worst["subS"] <= scale, worst["subS"], scale, wit.get("subS")),
        Check(S, "M homogeneous", worst["hom"] <= 1e-14, worst["hom"], 1e-14, wit.get("hom")),
        Check(S, "lambda M#_lambda <= f#", worst["lam"] <= scale, worst["lam"], scale, wit.get("lam")),
        Check(S, "rearrangement equimeasurable", equi),
    ]
    if grid.torus:
        out.insert(0, Check(S, "fast M equals brute force", worst["fast"] <= 1e-12, worst["fast"],
                            1e-12, wit.get("fast")))
    return out


def suite_weights(cfg: SuiteConfig, grid: GridSpec, ctx: dict) -> list[Check]:
    S = "weights"
    X = parse_lattice(cfg.lattice, grid)
    out = []
    m_norm = 1.5 * m_operator_norm_probe(X, grid, trials=min(cfg.trials, 10), seed=cfg.seed)
    bad = {"majorizes": 0, "norm_ratio_ok": 0, "maximal_ok": 0}
    worst_ratio, worst_m = 0.0, 0.0
    for t in range(cfg.trials):
        f = cycled_function(grid, cfg.seed, S, t, signed=True)
        cert = rubio_majorant(f, X, m_norm, 1e-6)
        v = verify_rubio_certificate(cert, X, m_norm, 1e-6)
        for k in bad:
            bad[k] += not v[k]
        worst_ratio = max(worst_ratio, v["norm_ratio"])
        worst_m = max(worst_m, v["maximal_ratio"])
    out.append(Check(S, "rubio majorant w >= |f|", bad["majorizes"] == 0, bad["majorizes"], 0))
    out.append(Check(S, "rubio ||w|| <= 2 ||f||", bad["norm_ratio_ok"] == 0, worst_ratio, 2.0))
    out.append(Check(S, "rubio Mw <= 2m(1+eps)w", bad["maximal_ok"] == 0, worst_m, 1 + 1e-6))
    curve = a1_power_curve(grid, A1_QS, trials=min(cfg.trials, 10), seed=cfg.seed)
    mono = all(curve[a] <= curve[b] for a, b in zip(A1_QS, A1_QS[1:]))
    out.append(Check(S, "A1 constant of (Mf)^q finite and nondecreasing in q", mono,
                     max(curve.values()), None, {str(k): v for k, v in curve.items()}))
    w = GridFunction(grid, 1.0 + cycled_function(grid, cfg.seed, "ap", 0).values)
    dev = abs(ap_constant(w, 2.0) - ap_constant(GridFunction(grid, 7.0 * w.values), 2.0))
    out.append(Check(S, "A_p characteristic scale invariant", dev <= 1e-12 * ap_constant(w, 2.0), dev, None))
    dev = abs(a1_constant(w) - a1_constant(GridFunction(grid, 3.0 * w.values)))
    out.append(Check(S, "A_1 constant scale invariant", dev <= 1e-12 * a1_constant(w), dev, None))
    prm = a1interp_parameters(cfg.theta, cfg.q)
    margin, maj, skipped = -np.inf, True, 0
    for t in range(min(cfg.trials, 20)):
        g = cycled_function(grid, cfg.seed, "a1interp-g", t)
        hh = cycled_function(grid, cfg.seed, "a1interp-h", t)
        a = cycled_function(grid, cfg.seed, "a1interp-a", t)
        try:
            cert = calderon_l1_majorant(g, hh, cfg.theta, cfg.q, a)
        except WeightError:
            skipped += 1  # sparse trial whose maximal function misses some cell
            continue
        margin = max(margin, cert.holder_margin)
        maj &= bool(np.all(cert.majorant.values >= cert.majorized.values))
    out.append(Check(S, "a1interp majorant dominates", maj, None, None, prm,
                     f"{skipped} trials skipped" if skipped else ""))
    out.append(Check(S, "a1interp per-cube Holder split", margin <= 1e-12, margin, 1e-12))
    return out


def suite_lattices(cfg: SuiteConfig, grid: GridSpec, ctx: dict) -> list[Check]:
    S = "lattices"
    X = parse_lattice(cfg.lattice, grid)
    worst = {"c248": 0.0, "cinf": 0.0, "lux": 0.0, "tri": -np.inf, "tower": 0.0}
    th = cfg.theta
    for t in range(cfg.trials):
        f = cycled_function(grid, cfg.seed, S, t, signed=True)
        g = cycled_function(grid, cfg.seed, S + "-pair", t, signed=True)
        worst["c248"] = max(worst["c248"],
                            abs(calderon_norm(Lp(2), Lp(4), 0.5, f) / norm(Lp(8 / 3), f) - 1))
        worst["cinf"] = max(worst["cinf"],
                            abs(calderon_norm(Lp(np.inf), Lp(3), th, f) / norm(Lp(3 / th), f) - 1))
        p3 = ExponentFunction.constant(grid, 3.0)
        worst["lux"] = max(worst["lux"], abs(luxemburg_norm(p3, f) / norm(Lp(3), f) - 1))
        worst["tri"] = max(worst["tri"], norm(X, f + g) - norm(X, f) - norm(X, g))
        worst["tower"] = max(worst["tower"], abs(norm(Power(Power(X, 0.5), th), f)
                                                 / norm(Power(X, 0.5 * th), f) - 1))
    out = [
        Check(S, "(L2, L4)_1/2 equals L^8/3", worst["c248"] <= 1e-6, worst["c248"], 1e-6),
        Check(S, "(Linf, L3)_theta equals L^(3/theta)", worst["cinf"] <= 1e-6, worst["cinf"], 1e-6),
        Check(S, "constant-exponent Luxemburg equals L3", worst["lux"] <= 1e-10, worst["lux"], 1e-10),
        Check(S, f"triangle inequality in {cfg.lattice}", worst["tri"] <= 1e-9, worst["tri"], 1e-9),
        Check(S, "power tower", worst["tower"] <= 1e-9, worst["tower"], 1e-9),
    ]
    small = grid.with_(sides=(min(32, grid.sides[0]),) * grid.dim, max_cube_side=None)
    rep = lozanovsky_duality_check(Lp(2), Lp(4), th, small, trials=min(cfg.trials, 10), seed=cfg.seed)
    out.append(Check(S, "Lozanovsky duality (L2, L4)", rep["max_gap"] <= 0.02, rep["max_gap"], 0.02))
    gap = 0.0
    for t in range(min(cfg.trials, 5)):
        g = cycled_function(small, cfg.seed, "probe", t)
        Y = parse_lattice(cfg.lattice, small)
        d = dual_norm(Y, g)
        gap = max(gap, (d - numeric_dual_probe(Y, g)) / d)
    out.append(Check(S, f"dual probe of {cfg.lattice} within 2%", -1e-9 <= gap <= 0.02, gap, 0.02))
    return out


def suite_bmo(cfg: SuiteConfig, grid: GridSpec, ctx: dict) -> list[Check]:
    S = "bmo"
    gamma, eps = 0.25, 1e-9
    fails = {"strom": None, "pow": None, "clip": None, "dec": None}
    worst_inf = -np.inf
    for t in range(cfg.trials):
        f = cycled_function(grid, cfg.seed, S, t, signed=True)
        n = bmo_norm(f)
        worst_inf = max(worst_inf, n - 2 * np.abs(f.values).max())
        res = stromberg_test(f, n / gamma + eps, gamma)
        if not res.passed and fails["strom"] is None:
            fails["strom"] = {"trial": t, **res.to_dict()}
        pos = GridFunction(grid, 1.0 + np.abs(f.values))
        lam = 0.5 * n
        if not contraction_oscillation_check(pos, PowerMap(cfg.alpha), lam) and fails["pow"] is None:
            fails["pow"] = {"trial": t}
        if not contraction_oscillation_check(pos, ClipMap(float(np.median(pos.values))), lam) \
                and fails["clip"] is None:
            fails["clip"] = {"trial": t}
        rep = power_bmo_report(f.abs(), cfg.alpha)
        if not rep["holds"] and fails["dec"] is None:
            fails["dec"] = {"trial": t, **rep}
    return [
        Check(S, "BMO <= 2 sup", worst_inf <= 1e-12, worst_inf, 1e-12),
        Check(S, "level-set test passes at lambda = ||f||/gamma + eps", fails["strom"] is None,
              witness=fails["strom"]),
        Check(S, "power map does not increase oscillation", fails["pow"] is None, witness=fails["pow"]),
        Check(S, "clip map does not increase oscillation", fails["clip"] is None, witness=fails["clip"]),
        Check(S, "BMO(f^alpha) <= BMO((f v 1)^alpha) + 2", fails["dec"] is None, witness=fails["dec"]),
    ]


def suite_interpolation(cfg: SuiteConfig, grid: GridSpec, ctx: dict) -> list[Check]:
    S = "interpolation"
    small = grid.with_(sides=(min(32, grid.sides[0]),) * grid.dim, max_cube_side=None)
    order, gap = -np.inf, 0.0
    for t in range(min(cfg.trials, 10)):
        a = cycled_function(small, cfg.seed, S, t, signed=True)
        up = interp_norm_upper(a, Lp(2), Lp(4), cfg.theta, cfg.tol).value
        lo = interp_norm_lower(a, Lp(2), Lp(4), cfg.theta, trials=4, seed=cfg.seed + t)
        order = max(order, lo / up - 1)
        gap = max(gap, 1 - lo / up)
    out = [Check(S, "lower <= upper", order <= 1e-9, order, 1e-9),
           Check(S, "lower/upper gap <= 5%", gap <= 0.05, gap, 0.05)]
    sweep = np.round(np.arange(0.1, 0.95, 0.1), 1)
    err = 0.0
    for th in sweep:
        for al in sweep:
            if th < al:
                d, gm = wolff_instantiation(th, al)
                xi, psi = wolff_exponents(gm, d)
                err = max(err, abs(xi - th), abs(psi - al))
            elif al < th:
                err = max(err, abs(reiteration_exponent(al, reiteration_eta(th, al)) - th))
    out.append(Check(S, "Wolff and reiteration round trip", err <= 1e-15, err, 1e-15))
    dom = -np.inf
    for t in range(min(cfg.trials, 10)):
        fs = SeqGridFunction.from_functions(
            [cycled_function(small, cfg.seed, "infint", 3 * t + k, signed=True) for k in range(3)])
        fam = infint_family(fs, Lp(2), Lp(4), cfg.theta, cfg.tol)
        b = boundary_norms(fam, Lp(2), Lp(4))
        bb = boundary_norms(fam.base, Lp(2), Lp(4))
        dom = max(dom, b[0] - bb[0], b[1] - bb[1])
    out.append(Check(S, "quotient family boundary norms <= base", dom <= 1e-12, dom, 1e-12))
    if grid.torus:
        a = cycled_function(small, cfg.seed, "gfamily", 0, signed=True)
        fam = interp_norm_upper(a, Lp(np.inf), Lp(2), cfg.theta).family
        dev = float(np.max(np.abs(bintt_gfamily(fam, None, cfg.theta).sup_abs(cfg.theta).values
                                  - sharp_maximal(a).values)))
        out.append(Check(S, "sup_j g_theta,j equals a#", dev <= 1e-12, dev, 1e-12))
    return out


def suite_chain(cfg: SuiteConfig, grid: GridSpec, ctx: dict) -> list[Check]:
    S = "bintt-chain"
    if not grid.torus:
        raise ConfigError("the bintt-chain suite runs on the torus")
    X = parse_lattice(cfg.lattice, grid)
    P = Power(X, cfg.theta)
    store = load_constants()
    entry = store["constants"].get(constants_key(P, grid))
    if entry is None:
        ctx["margins"] = {"i": None, "ii": None, "iii": None, "iv": None}
        return [Check(S, "sharp-domination constant available", False,
                      note=f"calibrate first: no constant for {lattice_key(P)} on grid "
                           f"{grid.digest()} (run 'verify calibrate' with the same grid flags)")]
    c = entry["sharp_domination"]
    margins = {"i": -np.inf, "ii": -np.inf, "iii": 0.0, "iv": -np.inf}
    viol = {k: 0 for k in margins}
    rows, witness = [], {}
    for t in range(cfg.trials):
        a = cycled_function(grid, cfg.seed, S, t, signed=True)
        rep = bintt_chain_check(a, X, cfg.theta, T_GRID, cfg.tol, c)
        for k in margins:
            if rep.margins[k] is not None and rep.margins[k] > margins[k]:
                margins[k] = rep.margins[k]
            viol[k] += rep.violations[k]
            if rep.violations[k] and k not in witness:
                witness[k] = {"trial": t, "margin": rep.margins[k]}
        rows.append({"seed": t, **{f"margin_{k}": rep.margins[k] for k in margins},
                     "ratio": rep.details["ratio"]})
    ctx["margins"] = margins
    ctx["constants"] = {"sharp_domination": c, "key": constants_key(P, grid)}
    ctx["seeds"] = list(range(cfg.trials))
    ctx["tables"]["chain_seeds"] = rows
    names = {"i": "(i) sup_j |g_it| <= f_it# <= ||f_it||_BMO",
             "ii": "(ii) sup_j |g_1+it| <= 2 M f_1+it",
             "iii": "(iii) sup_j g_theta = a# exactly",
             "iv": "(iv) ||a|| <= c ||a#|| in the power lattice"}
    return [Check(S, names[k], viol[k] == 0, margins[k], CHAIN_RTOL,
                  witness.get(k)) for k in ("i", "ii", "iii", "iv")]


SUITE_FUNCS = {"maximal": suite_maximal, "weights": suite_weights, "lattices": suite_lattices,
               "bmo": suite_bmo, "interpolation": suite_interpolation, "bintt-chain": suite_chain}


# --- constants store -----------------------------------------------------------

def constants_dir() -> Path:
    return Path(os.environ.get("VERIFY_CONSTANTS_DIR", "verify_constants"))


def constants_key(X, grid: GridSpec) -> str:
    return f"{lattice_key(X)}|{grid.digest()}|smax={grid.max_cube_side}"


def load_constants() -> dict:
    path = constants_dir() / CONSTANTS_FILE
    if not path.exists():
        return {"constants": {}, "provenance": {}}
    return json.loads(path.read_text())


def calibrate(cfg: SuiteConfig) -> tuple[dict, list[dict]]:
    """Constants for the configured lattice and grid (deterministic given the seed)."""
    grid = cfg.grid()
    if not grid.torus:
        raise ConfigError("calibration runs on the torus")
    X = parse_lattice(cfg.lattice, grid)
    block, rows = {}, []
    for Y in (X, Power(X, cfg.theta)):
        ratios = sharp_domination_ratios(Y, grid, cfg.trials, cfg.seed)
        c = max(ratios)
        block[constants_key(Y, grid)] = {"lattice": Y.to_dict(), "grid_digest": grid.digest(),
                                         "smax": grid.max_cube_side, "sharp_domination": c,
                                         "sharp_domination_complex": 2 * c}
        rows += [{"lattice": lattice_key(Y), "trial": k, "ratio": r} for k, r in enumerate(ratios)]
    small = grid.with_(sides=(min(32, grid.sides[0]),) * grid.dim, max_cube_side=None)
    Ys = parse_lattice(cfg.lattice, small)
    gap = 0.0
    for t in range(min(cfg.trials, 5)):
        g = cycled_function(small, cfg.seed, "probe", t)
        d = dual_norm(Ys, g)
        gap = max(gap, (d - numeric_dual_probe(Ys, g)) / d)
    block[constants_key(X, grid)]["dual_probe_gap"] = gap
    curve = a1_power_curve(grid, A1_QS, trials=min(cfg.trials, 10), seed=cfg.seed)
    block[f"a1_power|{grid.digest()}|smax={grid.max_cube_side}"] = {
        "grid_digest": grid.digest(), "smax": grid.max_cube_side,
        "curve": {str(q): v for q, v in curve.items()}}
    return block, rows


def write_constants(block: dict, cfg: SuiteConfig) -> Path:
    d = constants_dir()
    d.mkdir(parents=True, exist_ok=True)
    store = load_constants()
    prov = {"seed": cfg.seed, "trials": cfg.trials,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()), "version": __version__}
    for k, v in block.items():
        store["constants"][k] = v
        store["provenance"][k] = prov
    path = d / CONSTANTS_FILE
    path.write_text(json.dumps(store, sort_keys=True, indent=1))
    return path


def constants_block_bytes(block: dict) -> bytes:
    return json.dumps(block, sort_keys=True, separators=(",", ":")).encode()


# --- reports -------------------------------------------------------------------

def _clean(x):
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    if isinstance(x, (np.floating,)):
        return _clean(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def build_report(cfg: SuiteConfig, grid: GridSpec, checks: list[Check], ctx: dict) -> dict:
    passed = all(c.passed for c in checks)
    config = {k: v for k, v in asdict(cfg).items() if k != "out"}  # location is not configuration
    rep = {"schema_version": 1, "suite": cfg.suite, "config": config,
           "grid": grid.to_dict(), "grid_digest": grid.digest(),
           "checks": [asdict(c) for c in checks], "passed": passed, "exit_code": 0 if passed else 1}
    for k in ("margins", "constants", "seeds"):
        if k in ctx:
            rep[k] = ctx[k]
    rep = _clean(rep)
    jsonschema.validate(rep, REPORT_SCHEMA)
    return rep


def write_outputs(rep: dict, tables: dict, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(rep, sort_keys=True, indent=1))
    with open(out / "checks.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["suite", "name", "passed", "value", "threshold"])
        for c in rep["checks"]:
            w.writerow([c["suite"], c["name"], c["passed"], c["value"], c["threshold"]])
    for name, rows in tables.items():
        if not rows:
            continue
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


def summary_lines(rep: dict) -> list[str]:
    lines = []
    for c in rep["checks"]:
        tag = "PASS" if c["passed"] else "FAIL"
        val = "" if c["value"] is None else f" value={c['value']:.6g}"
        thr = "" if c["threshold"] is None else f" threshold={c['threshold']:.6g}"
        note = f" ({c['note']})" if c.get("note") else ""
        wit = f" witness={json.dumps(c['witness'], sort_keys=True)}" \
            if not c["passed"] and c.get("witness") is not None else ""
        lines.append(f"{tag} [{c['suite']}] {c['name']}{val}{thr}{note}{wit}")
    return lines


def run(cfg: SuiteConfig) -> tuple[int, dict]:
    grid = cfg.grid()
    names = [s for s in SUITES[:-1]] if cfg.suite == "all" else [cfg.suite]
    checks: list[Check] = []
    ctx: dict = {"tables": {}}
    for name in names:
        if name == "bintt-chain" and not grid.torus:
            continue
        try:
            checks += SUITE_FUNCS[name](cfg, grid, ctx)
        except (ConfigError, GridError, LatticeError):
            raise
        except Exception as exc:  # a suite that cannot finish is a failed check, not a crash
            checks.append(Check(name, "suite completed", False,
                                witness={"error": f"{type(exc).__name__}: {exc}"}))
    tables = ctx.pop("tables")
    rep = build_report(cfg, grid, checks, ctx)
    write_outputs(rep, tables, Path(cfg.out))
    return rep["exit_code"], rep


# --- entry point ---------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--suite", choices=SUITES, default="all")
    common.add_argument("--n", type=int, default=64, help="cells per axis")
    common.add_argument("--dim", type=int, choices=(1, 2), default=1)
    common.add_argument("--smax", type=int, default=None, help="largest cube side (default: n)")
    common.add_argument("--boundary", choices=("torus", "zero_extend"), default="torus")
    common.add_argument("--lattice", default="l2", help="l1, l2, l4, linf, lp:<p>, wl2, varp")
    common.add_argument("--theta", type=float, default=0.5)
    common.add_argument("--alpha", type=float, default=0.5)
    common.add_argument("--q", type=float, default=0.5)
    common.add_argument("--trials", type=int, default=20)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=1e-12)
    common.add_argument("--out", default="verify_out")
    p = argparse.ArgumentParser(prog="verify", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run property suites")
    sub.add_parser("calibrate", parents=[common], help="calibrate and store constants")
    sub.add_parser("report", parents=[common], help="print and validate a stored report")
    return p


def _config(ns) -> SuiteConfig:
    return SuiteConfig(ns.suite, ns.n, ns.dim, ns.smax, ns.boundary, ns.lattice, ns.theta,
                       ns.alpha, ns.q, ns.trials, ns.seed, ns.tol, ns.out)


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    cfg = _config(ns)
    try:
        if ns.command == "run":
            code, rep = run(cfg)
            print("\n".join(summary_lines(rep)))
            return code
        if ns.command == "calibrate":
            block, rows = calibrate(cfg)
            path = write_constants(block, cfg)
            out = Path(cfg.out)
            write_outputs_rows(out, "calibration_ratios", rows)
            for k, v in sorted(block.items()):
                c = v.get("sharp_domination")
                if c is not None:
                    print(f"CALIBRATED {k} sharp_domination={c:.6g}")
            print(f"constants written to {path}")
            return 0
        path = Path(cfg.out) / "report.json"
        rep = json.loads(path.read_text())
        jsonschema.validate(rep, REPORT_SCHEMA)
        print("\n".join(summary_lines(rep)))
        return int(rep["exit_code"])
    except (ConfigError, GridError, LatticeError) as exc:
        print(f"verify: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"verify: {exc}", file=sys.stderr)
        return 1


def write_outputs_rows(out: Path, name: str, rows: list[dict]) -> None:
    if not rows:
        return
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{name}.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    sys.exit(main())
