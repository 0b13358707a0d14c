import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def meshes(draw, max_elements=12):
    """Random meshes on random intervals, element sizes within a factor 4."""
    from advest.mesh import Mesh1D
    n = draw(st.integers(1, max_elements))
    a = draw(st.floats(-2, 2))
    h = draw(st.lists(st.floats(0.25, 1.0), min_size=n, max_size=n))
    length = draw(st.floats(0.2, 3.0))
    h = np.asarray(h) * length / np.sum(h)
    return Mesh1D(a + np.concatenate([[0.0], np.cumsum(h)]))


velocities = st.builds(lambda e, s: s * 10.0 ** e, st.floats(-4, 4), st.sampled_from([-1.0, 1.0]))


@pytest.fixture
def unit4():
    from advest.mesh import build_uniform
    return build_uniform((0.0, 1.0), 4)


# one line per acceptance criterion, echoed in the terminal summary
_CRITERIA: dict[int, str] = {}


@pytest.fixture(scope="session")
def criterion():
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
