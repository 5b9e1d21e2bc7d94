import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmointerp import kernels
from bmointerp.grid import GridFunction, GridSpec
from bmointerp.maximal import (UnsupportedModeError, hl_maximal, hl_maximal_fast,
                               local_sharp_maximal, maximal, rearrangement, s0_tail, sharp_maximal)
from bmointerp.sampling import cycled_function
from conftest import functions
import oracles

BACKENDS = sorted(kernels.available_backends())


def test_constant():
    g = GridSpec.line(6)
    f = GridFunction(g, np.full(6, -2.5))
    np.testing.assert_array_equal(hl_maximal(f).values, 2.5)
    np.testing.assert_array_equal(hl_maximal_fast(f).values, 2.5)
    np.testing.assert_array_equal(sharp_maximal(f).values, 0.0)
    np.testing.assert_array_equal(local_sharp_maximal(f, 0.3).values, 0.0)


def test_spike_on_four_cells():
    f = GridFunction(GridSpec.line(4), [1.0, 0, 0, 0])
    # cell 2 only meets the spike through side-3 cubes (0,1,2) and (2,3,0)
    expected = [1, 1 / 2, 1 / 3, 1 / 2]
    np.testing.assert_array_equal(hl_maximal(f).values, expected)
    np.testing.assert_array_equal(hl_maximal_fast(f).values, expected)
    np.testing.assert_allclose(oracles.maximal(f), expected)


def test_zero_function():
    f = GridFunction(GridSpec.square(5), np.zeros((5, 5)))
    assert not hl_maximal_fast(f).values.any()
    assert not sharp_maximal(f).values.any()


def test_sharp_two_cells():
    f = GridFunction(GridSpec.line(2), [0.0, 2.0])
    np.testing.assert_array_equal(sharp_maximal(f).values, [1, 1])


def test_fast_requires_torus():
    f = GridFunction(GridSpec.line(4, boundary="zero_extend"), np.ones(4))
    with pytest.raises(UnsupportedModeError, match="unimplemented"):
        hl_maximal_fast(f)
    np.testing.assert_array_equal(maximal(f).values, hl_maximal(f).values)


@given(functions(complex_=True))
def test_maximal_matches_oracle(f):
    np.testing.assert_allclose(hl_maximal(f).values, oracles.maximal(f), rtol=1e-12, atol=1e-12)


@given(functions(complex_=True))
def test_sharp_matches_oracle(f):
    np.testing.assert_allclose(sharp_maximal(f).values, oracles.sharp(f), rtol=1e-12, atol=1e-11)


@given(functions(), st.floats(0.05, 0.95))
def test_local_sharp_matches_oracle(f, lam):
    np.testing.assert_allclose(local_sharp_maximal(f, lam).values, oracles.local_sharp(f, lam),
                               rtol=1e-12, atol=1e-12)


@given(functions(boundaries=("torus",), complex_=True))
def test_fast_matches_brute(f):
    np.testing.assert_allclose(hl_maximal_fast(f).values, hl_maximal(f).values, rtol=1e-12, atol=0)


@pytest.mark.parametrize("backend", BACKENDS)
@given(f=functions(complex_=True))
def test_backends_agree(backend, f):
    ref = "python"
    for op in (hl_maximal, sharp_maximal):
        np.testing.assert_allclose(op(f, backend=backend).values, op(f, backend=ref).values,
                                   rtol=1e-12, atol=1e-12)
    if f.grid.torus:
        np.testing.assert_allclose(hl_maximal_fast(f, backend=backend).values,
                                   hl_maximal_fast(f, backend=ref).values, rtol=1e-12, atol=0)
    re = f.real()
    np.testing.assert_allclose(local_sharp_maximal(re, 0.3, backend=backend).values,
                               local_sharp_maximal(re, 0.3, backend=ref).values, atol=1e-12)


@pytest.mark.parametrize("boundary", ["torus", "zero_extend"])
def test_serial_equals_parallel(boundary):
    g = GridSpec(2, (12, 12), 1.0, boundary)
    f = cycled_function(g, 3, "parallel", 0, signed=True, complex_=True)
    for op in (hl_maximal, sharp_maximal):
        np.testing.assert_array_equal(op(f, workers=1).values, op(f, workers=4).values)
    r = f.real()
    np.testing.assert_array_equal(local_sharp_maximal(r, 0.2, workers=1).values,
                                  local_sharp_maximal(r, 0.2, workers=3).values)


@given(functions(complex_=True), st.data())
def test_pointwise_inequalities(f, data):
    g = data.draw(functions(grid=f.grid, complex_=True))
    mf, sf = hl_maximal(f).values, sharp_maximal(f).values
    assert np.all(mf >= np.abs(f.values))
    assert np.all(sf <= 2 * mf + 1e-12)
    assert np.all(sharp_maximal(f.real()).values <= sf + 1e-12)
    assert np.all(hl_maximal(f + g).values <= mf + hl_maximal(g).values + 1e-12)
    assert np.all(sharp_maximal(f + g).values <= sf + sharp_maximal(g).values + 1e-12)


@given(functions(complex_=True), st.complex_numbers(max_magnitude=1e3, allow_nan=False,
                                                     allow_infinity=False))
def test_homogeneity(f, c):
    scaled = GridFunction(f.grid, c * f.values)
    np.testing.assert_allclose(hl_maximal(scaled).values, abs(c) * hl_maximal(f).values,
                               rtol=1e-13, atol=1e-300)


@given(functions(), st.floats(0.05, 0.95))
def test_local_sharp_below_sharp_over_lambda(f, lam):
    assert np.all(lam * local_sharp_maximal(f, lam).values <= sharp_maximal(f).values + 1e-12)


@pytest.mark.parametrize("lam", [0.0, 1.0, -0.5, 1.5])
def test_local_sharp_domain(lam):
    with pytest.raises(ValueError):
        local_sharp_maximal(GridFunction(GridSpec.line(3), [1.0, 2, 3]), lam)


def test_local_sharp_rejects_complex():
    with pytest.raises(TypeError):
        local_sharp_maximal(GridFunction(GridSpec.line(2), [1j, 0]), 0.5)


def test_stromberg_pairing_bound():
    """``sum |f g| <= c sum M#_lam f * M g``: c from the first half of the trials
    bounds the second half within a factor 2."""
    g = GridSpec.line(64)
    lam = 0.25

    def ratio(t):
        f = cycled_function(g, 11, "pairing-f", t, signed=True)
        f = GridFunction(g, f.values - f.values.mean())
        w = cycled_function(g, 11, "pairing-g", t)
        lhs = np.sum(np.abs(f.values * w.values))
        rhs = np.sum(local_sharp_maximal(f, lam).values * hl_maximal(w).values)
        return lhs / rhs

    c = max(ratio(t) for t in range(20))
    assert np.isfinite(c)
    assert max(ratio(t) for t in range(20, 40)) <= 2 * c


def test_rearrangement_example():
    r = rearrangement(GridFunction(GridSpec.line(3), [3.0, 1, 2]))
    np.testing.assert_array_equal(r.values, [3, 2, 1])
    np.testing.assert_array_equal(r.breakpoints, [0, 1, 2, 3])
    assert r(0.5) == 3 and r(1.0) == 2 and r(2.9) == 1


def test_rearrangement_zero():
    r = rearrangement(GridFunction(GridSpec.line(5), np.zeros(5)))
    assert not r.values.any()


@given(functions(complex_=True))
def test_rearrangement_equimeasurable(f):
    r = rearrangement(f)
    assert np.all(np.diff(r.values) <= 0)
    np.testing.assert_array_equal(np.sort(r.values), np.sort(np.abs(f.values).ravel()))
    assert r.total_measure == pytest.approx(f.grid.total_measure)
    assert r.integral() == pytest.approx(np.abs(f.values).sum() * f.grid.cell_measure, rel=1e-12)


def test_s0_tail():
    g = GridSpec.line(3)
    assert s0_tail(GridFunction(g, [3.0, 0, 2])) == 0
    assert s0_tail(GridFunction(g, np.ones(3))) == 1
    assert s0_tail(GridFunction(g, [3.0, 1, 2])) == 1


def test_complex_sharp_uses_modulus():
    # f# of a complex function is not the sum of real and imaginary parts
    g = GridSpec.line(4)
    f = GridFunction(g, [1, 1j, -1, -1j])
    expected = oracles.sharp(f)
    np.testing.assert_allclose(sharp_maximal(f).values, expected, rtol=1e-14)
    assert np.all(sharp_maximal(f.real()).values <= expected + 1e-15)
