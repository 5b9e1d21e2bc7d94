import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmointerp.grid import Cube, GridFunction, GridSpec, cube_values, translate_cube
from bmointerp.interpolation import (CHAIN_RTOL, T_GRID, CubeFamily, PowerFamily, QuotientFamily,
                                     StripError, StripPoint, bintt_chain_check, bintt_gfamily,
                                     boundary_norms, family_eval, infint_family,
                                     interp_norm_lower, interp_norm_upper, origin_cubes,
                                     reiteration_eta, reiteration_exponent,
                                     sharp_domination_calibrate, sharp_domination_ratio,
                                     sharp_domination_ratios, wolff_exponents,
                                     wolff_instantiation)
from bmointerp.lattices import (Lp, Power, SeqGridFunction, calderon_norm, mixed_norm, norm)
from bmointerp.maximal import hl_maximal, sharp_maximal
from bmointerp.sampling import cycled_function, stream
from conftest import functions

G = GridSpec.line(16, spacing=1 / 16)


def rand(grid, t, label="a", complex_=False):
    return cycled_function(grid, 0, label, t, signed=True, complex_=complex_)


def power_family(grid, seed=0):
    rng = stream(seed, "family")
    u = np.exp(1j * rng.uniform(0, 2 * np.pi, size=grid.shape))
    g0 = rng.lognormal(0, 1, size=grid.shape)
    g1 = rng.lognormal(0, 1, size=grid.shape)
    return PowerFamily(GridFunction(grid, u), GridFunction(grid, g0), GridFunction(grid, g1))


def test_strip_points():
    assert StripPoint.of(0.3 + 2j) == StripPoint(0.3, 2.0)
    assert StripPoint(1.0, -4).z == 1 - 4j
    for bad in (-0.1, 1.1):
        with pytest.raises(StripError):
            StripPoint(bad)
    with pytest.raises(StripError):
        family_eval(power_family(G), 1.5)


def test_power_family_endpoints_and_modulus():
    fam = power_family(G)
    u, g0, g1 = fam.u.values, fam.g0.values, fam.g1.values
    np.testing.assert_allclose(family_eval(fam, 0).values, u * g0, rtol=1e-14)
    np.testing.assert_allclose(family_eval(fam, 1).values, u * g1, rtol=1e-14)
    np.testing.assert_allclose(np.abs(family_eval(fam, 0.5).values), np.sqrt(g0 * g1), rtol=1e-14)
    for t in T_GRID:
        np.testing.assert_allclose(np.abs(fam.eval(complex(0, t)).values), fam.modulus(0), rtol=1e-13)
        np.testing.assert_allclose(np.abs(fam.eval(complex(1, t)).values), fam.modulus(1), rtol=1e-13)


def test_power_family_diagonal():
    fam = power_family(G)
    diag = PowerFamily(fam.u, fam.g0, fam.g0)
    for z in (0, 0.3 + 1j, 1 - 2j):
        np.testing.assert_allclose(diag.eval(z).values, fam.u.values * fam.g0.values, rtol=1e-13)


def test_zero_power_conventions():
    g = GridSpec.line(2)
    fam = PowerFamily(GridFunction(g, [1.0, 1.0]), GridFunction(g, [0.0, 2.0]),
                      GridFunction(g, [3.0, 0.0]))
    # 0^w = 0 for Re w > 0 and 1 for Re w = 0
    np.testing.assert_allclose(fam.eval(0.5).values, [0, 0])
    np.testing.assert_allclose(fam.eval(0).values, [0, 2])
    np.testing.assert_allclose(fam.eval(1).values, [3, 0])


def test_power_family_validation():
    g = GridSpec.line(2)
    with pytest.raises(StripError):
        PowerFamily(GridFunction(g, [2.0, 1.0]), GridFunction(g, [1.0, 1]), GridFunction(g, [1.0, 1]))
    with pytest.raises(StripError):
        PowerFamily(GridFunction(g, [1.0, 1.0]), GridFunction(g, [-1.0, 1]), GridFunction(g, [1.0, 1]))


def test_boundary_norms_of_diagonal_family():
    a = rand(G, 0)
    fam = PowerFamily(GridFunction(G, np.sign(a.values)), a.abs(), a.abs())
    b0, b1 = boundary_norms(fam, Lp(2.0), Lp(4.0))
    assert b0 == pytest.approx(norm(Lp(2.0), a)) and b1 == pytest.approx(norm(Lp(4.0), a))
    with pytest.raises(ValueError):
        boundary_norms(fam, Lp(2.0), Lp(4.0), t_samples=())


@pytest.mark.parametrize("t", range(4))
def test_interp_upper(t):
    a = rand(G, t, complex_=t % 2 == 1)
    up = interp_norm_upper(a, Lp(2.0), Lp(4.0), 0.5)
    assert up.value == pytest.approx(norm(Lp(8 / 3), a), rel=1e-6)
    # rebalanced witness: both boundary norms equal the value, f_theta = a
    assert up.boundary == pytest.approx((up.value, up.value), rel=1e-9)
    np.testing.assert_allclose(up.family.eval(0.5).values, a.values, rtol=1e-9, atol=1e-12)
    diag = interp_norm_upper(a, Lp(3.0), Lp(3.0), 0.4)
    assert diag.value == pytest.approx(norm(Lp(3.0), a), rel=1e-9)
    lp4 = interp_norm_upper(a, Lp(np.inf), Lp(2.0), 0.5)
    assert lp4.value == pytest.approx(norm(Lp(4.0), a), rel=1e-12)


@pytest.mark.parametrize("t", range(4))
def test_interp_lower(t):
    a = rand(G, t)
    lo = interp_norm_lower(a, Lp(2.0), Lp(4.0), 0.5, trials=4, seed=t)
    up = interp_norm_upper(a, Lp(2.0), Lp(4.0), 0.5).value
    assert lo <= up * (1 + 1e-9)
    assert lo >= 0.95 * up
    assert interp_norm_lower(a, Lp(3.0), Lp(3.0), 0.5) == pytest.approx(norm(Lp(3.0), a), rel=0.01)
    assert interp_norm_lower(GridFunction(G, np.zeros(16)), Lp(2.0), Lp(4.0), 0.5) == 0


def test_infint_single_and_disjoint():
    F = rand(G, 0).abs()
    fam = infint_family(SeqGridFunction.from_functions([F]), Lp(2.0), Lp(4.0), 0.5)
    np.testing.assert_allclose(fam.eval(0.3 + 1j).values[0], fam.base.eval(0.3 + 1j).values,
                               rtol=1e-12)
    parts = [np.where(np.arange(16) % 3 == k, F.values, 0.0) for k in range(3)]
    fs = SeqGridFunction(G, np.stack(parts))
    fam = infint_family(fs, Lp(2.0), Lp(4.0), 0.5)
    np.testing.assert_allclose(fam.eval(0.5).values, fs.values, rtol=1e-9, atol=1e-14)


@pytest.mark.parametrize("t", range(5))
def test_infint_boundary_domination(t):
    fs = SeqGridFunction.from_functions([rand(G, 3 * t + k, "infint", complex_=k == 1)
                                         for k in range(3)])
    fam = infint_family(fs, Lp(2.0), Lp(4.0), 0.5)
    assert isinstance(fam, QuotientFamily)
    b = boundary_norms(fam, Lp(2.0), Lp(4.0))
    bb = boundary_norms(fam.base, Lp(2.0), Lp(4.0))
    assert b[0] <= bb[0] and b[1] <= bb[1]
    value = calderon_norm(Lp(2.0), Lp(4.0), 0.5, fs.sup_abs())
    for j, X in ((0, Lp(2.0)), (1, Lp(4.0))):
        assert mixed_norm(X, fam.eval(complex(j, 1.0))) <= (1 + 1e-9) * value
    np.testing.assert_allclose(fam.eval(0.5).values, fs.values, rtol=1e-9, atol=1e-12)


def test_origin_cubes():
    g = GridSpec.square(4, max_cube_side=2)
    cubes = origin_cubes(g)
    assert len(cubes) == 1 + 4
    assert all(q.contains(g, (0, 0)) for q in cubes)
    with pytest.raises(StripError):
        CubeFamily(power_family(g), [Cube(2, (1, 0))], 0.5)


def _g_oracle(fam, z, q, x):
    """``avg_{Q+x} (f_z - avg f_z) * conj sign(f_theta - avg f_theta)`` by direct evaluation."""
    grid = fam.grid
    qx = translate_cube(q, x, grid)
    fz = cube_values(fam.eval(z), qx).astype(complex)
    ft = cube_values(fam.eval(0.5), qx).astype(complex)
    dt = ft - ft.mean()
    sign = np.where(np.abs(dt) > 0, np.conj(dt) / np.where(np.abs(dt) > 0, np.abs(dt), 1), 0)
    return np.mean((fz - fz.mean()) * sign)


@pytest.mark.parametrize("boundary", ["torus", "zero_extend"])
def test_cube_family_matches_definition(boundary):
    g = GridSpec(2, (5, 5), 1.0, boundary, 3)
    fam = power_family(g, 1)
    cf = bintt_gfamily(fam, None, 0.5)
    for z in (0.5, 0.2 + 1j, 1 - 0.5j):
        vals = cf.eval(z).values
        for j, q in enumerate(cf.cubes):
            for x in [(0, 0), (2, 3), (4, 4)]:
                assert vals[j][x] == pytest.approx(_g_oracle(fam, z, q, x), abs=1e-12)


@pytest.mark.parametrize("boundary", ["torus", "zero_extend"])
def test_cube_family_sup_kernel_matches_eval(boundary):
    g = GridSpec(1, (12,), 1.0, boundary)
    cf = bintt_gfamily(power_family(g, 2), None, 0.3)
    for z in (0.3, 1j, 1 + 2j):
        np.testing.assert_allclose(cf.sup_abs(z).values, cf.eval(z).sup_abs().values, atol=1e-12)
    many = cf.sup_abs_many([0.3, 1j], workers=2)
    np.testing.assert_allclose(many[1].values, cf.sup_abs(1j).values, atol=0)


def test_cube_family_constant_base():
    g = GridSpec.line(8)
    c = GridFunction(g, np.full(8, 2.0))
    cf = bintt_gfamily(PowerFamily(GridFunction(g, np.ones(8)), c, c), None, 0.5)
    for z in (0, 0.5, 1 + 1j):
        assert not np.any(np.abs(cf.eval(z).values) > 1e-15)


@given(functions(complex_=True, boundaries=("torus",), max_n1=8, max_n2=4))
def test_cube_family_at_theta_is_sharp(a):
    if not np.any(a.values):
        return
    fam = interp_norm_upper(a, Lp(np.inf), Lp(2.0), 0.5).family
    cf = bintt_gfamily(fam, None, 0.5)
    vals = cf.eval(0.5).values
    assert np.all(np.abs(vals.imag) <= 1e-9 * (1 + np.abs(vals.real))) and np.all(vals.real >= -1e-12)
    ft = fam.eval(0.5)
    scale = max(1.0, np.abs(ft.values).max())
    np.testing.assert_allclose(cf.sup_abs(0.5).values, sharp_maximal(ft).values, atol=1e-12 * scale)


def test_restricted_cube_list():
    g = GridSpec.line(10)
    fam = power_family(g, 3)
    sub = bintt_gfamily(fam, origin_cubes(g.with_(max_cube_side=3)), 0.5)
    full = bintt_gfamily(fam, None, 0.5)
    assert np.all(sub.sup_abs(0.5).values <= full.sup_abs(0.5).values + 1e-12)


def test_sharp_domination_examples():
    g = GridSpec.line(2)
    f = GridFunction(g, [-1.0, 1.0])
    # f# = (1, 1), so the ratio is the norm of (-1, 1) over the norm of (1, 1)
    assert sharp_domination_ratio(Lp(2.0), f) == pytest.approx(1.0)
    assert sharp_domination_ratio(Lp(2.0), GridFunction(g, [3.0, 3.0])) is None
    c = sharp_domination_calibrate(Lp(2.0), GridSpec.line(32), trials=5)
    assert c == max(sharp_domination_ratios(Lp(2.0), GridSpec.line(32), trials=5))
    with pytest.raises(ValueError):
        sharp_domination_ratios(Lp(2.0), GridSpec.line(8, boundary="zero_extend"))


def test_sharp_domination_parallel_equals_serial():
    g = GridSpec.line(32)
    assert sharp_domination_ratios(Lp(2.0), g, 6, workers=1) == \
        sharp_domination_ratios(Lp(2.0), g, 6, workers=3)


def test_chain_zero_function():
    rep = bintt_chain_check(GridFunction(G, np.zeros(16)), Lp(2.0), 0.5, c=1.2)
    assert rep.passed and not any(rep.violations.values())
    rep = bintt_chain_check(GridFunction(G, np.zeros(16)), Lp(2.0), 0.5)
    assert rep.status == "calibrate first" and not rep.passed


@pytest.mark.parametrize("t", range(4))
def test_chain_small(t):
    a = rand(G, t, "chain", complex_=t == 3)
    c = sharp_domination_calibrate(Power(Lp(2.0), 0.5), G, trials=10)
    rep = bintt_chain_check(a, Lp(2.0), 0.5, c=c)
    assert rep.passed, rep.to_dict()
    assert rep.margins["iii"] <= 1e-12
    assert json.loads(json.dumps(rep.to_dict()))["margins"].keys() == {"i", "ii", "iii", "iv"}
    assert bintt_chain_check(a, Lp(2.0), 0.5).status == "calibrate first"


def test_chain_parallel_equals_serial():
    a = rand(G, 0, "chain")
    r1 = bintt_chain_check(a, Lp(2.0), 0.5, c=2.0, workers=1)
    r2 = bintt_chain_check(a, Lp(2.0), 0.5, c=2.0, workers=3)
    assert r1.margins == r2.margins


def test_chain_detects_wrong_constant():
    a = rand(G, 1, "chain")
    rep = bintt_chain_check(a, Lp(2.0), 0.5, c=0.1)
    assert not rep.passed and rep.violations["iv"] == 1 and rep.margins["iv"] > 0


def test_chain_requires_torus():
    with pytest.raises(ValueError):
        bintt_chain_check(GridFunction(GridSpec.line(4, boundary="zero_extend"), [1.0, 0, 0, 0]),
                          Lp(2.0), 0.5, c=1.0)


def test_chain_estimate_ii_direct():
    """Estimate (ii) against a direct evaluation of 2 M f_(1+it)."""
    a = rand(G, 2, "chain")
    fam = interp_norm_upper(a - a.values.mean(), Lp(np.inf), Lp(2.0), 0.5).family
    cf = bintt_gfamily(fam, None, 0.5)
    for t in (0.0, 1.0, -2.0):
        z = complex(1, t)
        assert np.all(cf.sup_abs(z).values <= 2 * hl_maximal(fam.eval(z)).values * (1 + CHAIN_RTOL))


def test_wolff_examples():
    assert wolff_exponents(0.5, 0.5) == pytest.approx((1 / 3, 2 / 3), abs=1e-15)
    d, g = wolff_instantiation(0.25, 0.5)
    assert (d, g) == pytest.approx((0.5, 1 / 3), abs=1e-15)
    assert wolff_exponents(g, d) == pytest.approx((0.25, 0.5), abs=1e-15)
    assert wolff_exponents(1 - 1e-12, 0.4)[1] == pytest.approx(1.0, abs=1e-11)
    for bad in ((0.0, 0.5), (0.5, 1.0)):
        with pytest.raises(ValueError):
            wolff_exponents(*bad)


def test_reiteration_examples():
    assert reiteration_exponent(0.4, 0.0) == 0.4 and reiteration_exponent(0.4, 1.0) == 1.0
    assert reiteration_eta(0.75, 0.5) == 0.5 and reiteration_exponent(0.5, 0.5) == 0.75
    assert reiteration_eta(2 / 3, 1 / 3) == pytest.approx(0.5, abs=1e-15)
    assert reiteration_exponent(1 / 3, reiteration_eta(2 / 3, 1 / 3)) == pytest.approx(2 / 3, abs=1e-15)
    with pytest.raises(ValueError):
        reiteration_eta(0.3, 0.5)


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_exponent_round_trips(theta, alpha):
    if theta == alpha:
        return
    # rounding theta / alpha costs about eps / |alpha - theta| near the diagonal
    tol = 1e-15 + 4e-16 / abs(alpha - theta)
    if theta < alpha:
        xi, psi = wolff_exponents(*reversed(wolff_instantiation(theta, alpha)))
        assert abs(xi - theta) <= tol and abs(psi - alpha) <= tol
    else:
        assert abs(reiteration_exponent(alpha, reiteration_eta(theta, alpha)) - theta) <= tol


def test_exponent_sweep():
    pts = [k / 10 for k in range(1, 10)]
    worst = 0.0
    for theta in pts:
        for alpha in pts:
            if theta < alpha:
                xi, psi = wolff_exponents(*reversed(wolff_instantiation(theta, alpha)))
                worst = max(worst, abs(xi - theta), abs(psi - alpha))
            else:
                worst = max(worst, abs(reiteration_exponent(alpha, reiteration_eta(theta, alpha)) - theta))
    assert worst <= 1e-15
