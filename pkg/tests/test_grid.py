import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmointerp.grid import (Cube, GridError, GridFunction, GridSpec, cube_average, cube_family,
                            cube_means, translate, translate_cube)
from conftest import functions, grids
import oracles


@pytest.mark.parametrize("grid,count", [
    (GridSpec.line(4, max_cube_side=2), 8),
    (GridSpec.line(1), 1),
    (GridSpec.square(3, max_cube_side=2), 18),
])
def test_cube_family_counts(grid, count):
    assert len(cube_family(grid)) == count


def test_cube_family_order_side_then_anchor():
    fam = cube_family(GridSpec.square(3, max_cube_side=2))
    assert fam == sorted(fam)
    assert fam[0] == Cube(1, (0, 0)) and fam[-1] == Cube(2, (2, 2))


@given(grids())
def test_cube_family_matches_enumeration(g):
    assert len(cube_family(g)) == sum(1 for _ in oracles.cubes(g))


def test_zero_extend_family_includes_overhang():
    g = GridSpec.line(3, boundary="zero_extend", max_cube_side=2)
    anchors = [q.anchor[0] for q in cube_family(g) if q.side == 2]
    assert anchors == [-1, 0, 1, 2]


def test_cube_average_examples(line4):
    assert cube_average(GridFunction(line4, [0, 4, 0, 0]), Cube(2, (1,))) == 2
    assert cube_average(GridFunction(line4, np.full(4, 3.5)), Cube(3, (2,))) == 3.5
    one = GridSpec.line(1, boundary="zero_extend")
    # side 2 needs max_cube_side <= N only for the family; averages accept any cube
    assert cube_average(GridFunction(one, [4.0]), Cube(2, (-1,))) == 2
    assert cube_average(GridFunction(one, [4.0]), Cube(2, (0,))) == 2


def test_cube_measure():
    g = GridSpec.square(4, spacing=0.5)
    assert Cube(3, (0, 0)).measure(g) == 1.5 ** 2


def test_translate_cube_examples(line4):
    assert translate_cube(Cube(2, (0,)), 3, line4) == Cube(2, (3,))
    assert translate_cube(Cube(2, (1,)), 0, line4) == Cube(2, (1,))
    assert translate_cube(Cube(1, (2,)), 3, line4) == Cube(1, (1,))


@given(functions(), st.data())
def test_average_linear_and_monotone(f, data):
    g = f.grid
    other = data.draw(functions(grid=g))
    big = GridFunction(g, np.maximum(f.values, other.values))
    for q in cube_family(g):
        s = cube_average(f + other, q)
        assert s == pytest.approx(cube_average(f, q) + cube_average(other, q), abs=1e-12)
        assert cube_average(big, q) >= cube_average(f, q) - 1e-12
        assert abs(cube_average(f, q)) <= cube_average(f.abs(), q) + 1e-12


@given(functions(boundaries=("torus",)), st.data())
def test_translation_invariance(f, data):
    g = f.grid
    x = tuple(data.draw(st.integers(-10, 10)) for _ in range(g.dim))
    shifted = translate(f, x)
    minus = tuple(-v for v in x)
    for q in cube_family(g):
        assert cube_average(shifted, q) == pytest.approx(
            cube_average(f, translate_cube(q, minus, g)), abs=1e-12)


@given(functions())
def test_cube_means_match_averages(f):
    g = f.grid
    for s in range(1, g.max_cube_side + 1):
        means = cube_means(f.values, s, g.torus).ravel()
        expected = [cube_average(f, q) for q in cube_family(g) if q.side == s]
        np.testing.assert_allclose(means, expected, atol=1e-12)


@given(functions(complex_=True))
def test_json_round_trip(f):
    back = GridFunction.from_json(f.to_json())
    assert back.grid == f.grid
    np.testing.assert_array_equal(back.values, f.values)


def test_serialization_layout():
    f = GridFunction(GridSpec.square(2), np.array([[1, 2], [3, 4j]]))
    d = f.to_dict()
    assert set(d) == {"dim", "sides", "spacing", "boundary", "max_cube_side", "values"}
    assert d["values"][3] == [0.0, 4.0]


@pytest.mark.parametrize("kw", [
    dict(dim=3, sides=(2, 2, 2)), dict(dim=1, sides=(0,)), dict(dim=1, sides=(4,), spacing=0.0),
    dict(dim=1, sides=(4,), boundary="mirror"), dict(dim=1, sides=(4,), max_cube_side=5),
    dict(dim=2, sides=(4,)),
])
def test_invalid_grids(kw):
    with pytest.raises(GridError):
        GridSpec(**kw)


def test_values_must_be_finite(line4):
    with pytest.raises(GridError):
        GridFunction(line4, [0, np.nan, 0, 0])
    with pytest.raises(GridError):
        GridFunction(line4, [np.inf, 0, 0, 0])


def test_mixing_grids_rejected(line4):
    with pytest.raises(GridError):
        GridFunction(line4, np.ones(4)) + GridFunction(GridSpec.line(4, spacing=0.5), np.ones(4))


def test_digest_depends_on_every_field():
    base = GridSpec.line(8)
    variants = [base.with_(sides=(9,)), base.with_(spacing=0.5), base.with_(boundary="zero_extend"),
                base.with_(max_cube_side=4)]
    assert len({base.digest(), *(v.digest() for v in variants)}) == 5
