import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fieldqc import homogenized, unitcell  # noqa: E402

AL_LAMBDA, AL_ALPHA, AL_GAMMA, AL_A0 = 1.0 / 6.0, 0.1629, 0.9449, 7.5

ACCEPTANCE = []


@pytest.fixture(scope="session")
def al_model():
    return homogenized.build_model(AL_LAMBDA, AL_ALPHA, AL_GAMMA)


@pytest.fixture(scope="session")
def jellium_spec():
    return unitcell.UnitCellSpec.from_lattice("fcc", AL_A0, 4.0, n=16, mode="uniform-background")


@pytest.fixture(scope="session")
def nucleus_spec():
    return unitcell.UnitCellSpec.from_lattice("fcc", AL_A0, 4.0, sigma_nuc=0.75, n=32)


@pytest.fixture(scope="session")
def nucleus_fields(nucleus_spec):
    return unitcell.solve_unit_cell(nucleus_spec)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def record():
    """Log one pass/fail line for an acceptance criterion."""
    def log(n, ok, detail):
        line = f"Criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        ACCEPTANCE.append(line)
        return ok
    return log


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
