import numpy as np
import pytest

from drumflux.eigensolve import objective
from drumflux.geometry.curve import build_circle
from drumflux.geometry.polygon import PolarPolygon, RoundedPolygon, build_from_polygon, build_rounded_polygon

J01 = 2.404825557695773
J11 = 3.8317059702075125
CSTAR = 0.3655840228073865
SQUARE = np.array([[1.0, 0.0], [1.0, 2.0], [-1.0, 2.0], [-1.0, 0.0]])


@pytest.fixture(scope="session")
def circle():
    return build_circle(1.0, 32)


@pytest.fixture(scope="session")
def circle_eig(circle):
    return objective(circle)


@pytest.fixture(scope="session")
def square():
    return build_from_polygon(RoundedPolygon(SQUARE, alpha=0.1))


@pytest.fixture(scope="session")
def square_eig(square):
    return objective(square)


@pytest.fixture(scope="session")
def semidisk16():
    return build_rounded_polygon(PolarPolygon(np.ones(16), alpha=0.1))


@pytest.fixture(scope="session")
def semidisk16_eig(semidisk16):
    return objective(semidisk16)


# -- acceptance summary ------------------------------------------------------

_ACCEPTANCE = {}


def record(n: int, ok: bool, detail: str) -> None:
    _ACCEPTANCE[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(_ACCEPTANCE[n])


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
