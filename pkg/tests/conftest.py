import warnings

import numpy as np
import pytest

from thermion.potential import make_bump_well

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def well():
    return make_bump_well(10.0, 1.0, 0.5)


@pytest.fixture(scope="session")
def free_well():
    return make_bump_well(0.0, 1.0, 0.5)


@pytest.fixture(scope="session")
def engine(well):
    from thermion.scattering import Engine
    return Engine(well)


@pytest.fixture(scope="session")
def ground(engine):
    return engine.bound_states[0]


@pytest.fixture(scope="session")
def coupling():
    from thermion.thermal import example_coupling
    return example_coupling()


@pytest.fixture(scope="session")
def fgr_setup(engine, ground, coupling):
    from thermion.fgr import InteractionG, fgr_k_grid, fgr_tables
    from thermion.thermal import uv_cutoff
    g = InteractionG(coupling, 0.05)
    om = uv_cutoff(coupling, 1.0, rel=1e-10)
    kg = fgr_k_grid(ground.energy, 0.1, om)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tables = fgr_tables(engine, ground, g, kg, om)
    return {"interaction": g, "omega_max": om, "kgrid": kg, "tables": tables}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
