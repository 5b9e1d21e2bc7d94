import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from bmointerp.grid import GridFunction, GridSpec

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion lines collected by test_acceptance.py, printed after the run
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split(".")[0])):
        ok, line = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}  {line}")


@st.composite
def grids(draw, max_n1=9, max_n2=5, dims=(1, 2), boundaries=("torus", "zero_extend")):
    dim = draw(st.sampled_from(dims))
    n = draw(st.integers(1, max_n1 if dim == 1 else max_n2))
    smax = draw(st.integers(1, n))
    boundary = draw(st.sampled_from(boundaries))
    spacing = draw(st.sampled_from([1.0, 0.5, 1 / 3]))
    return GridSpec(dim, (n,) * dim, spacing, boundary, smax)


@st.composite
def functions(draw, grid=None, complex_=False, low=-10.0, high=10.0, **kw):
    g = draw(grids(**kw)) if grid is None else grid
    vals = st.floats(low, high, allow_nan=False, allow_infinity=False)
    re = np.array(draw(st.lists(vals, min_size=g.ncells, max_size=g.ncells)))
    if complex_:
        im = np.array(draw(st.lists(vals, min_size=g.ncells, max_size=g.ncells)))
        return GridFunction(g, re + 1j * im)
    return GridFunction(g, re)


@pytest.fixture
def line4():
    return GridSpec.line(4)
