import logging

import numpy as np
import pytest

from lfpsim import Direction, Discretization, ParameterSet, SaturationParams
from lfpsim.dynamics import CellModel


@pytest.fixture(scope="session")
def params():
    return ParameterSet()


@pytest.fixture(scope="session")
def sat_params():
    return SaturationParams()


@pytest.fixture(scope="session")
def disc(params, sat_params):
    return Discretization.build(params, sat_params)


@pytest.fixture(scope="session")
def model(disc):
    return CellModel(disc)


@pytest.fixture(autouse=True)
def _quiet_negative_warning(caplog):
    caplog.set_level(logging.ERROR, logger="lfpsim.dynamics")


def random_state(model, rng, spread=0.3):
    """Electrolyte around c_ini and solid modes with a decaying random spectrum."""
    p = model.params
    c1 = p.c_ini * (1.0 + spread * rng.uniform(-1, 1, model.n_x))
    cs = np.zeros(model.cs_shape)
    cs[:, :, 0] = p.c_s_max * rng.uniform(0.2, 0.8, cs.shape[:2])
    n = cs.shape[2]
    # higher modes carry 1/r-scaled values; keep the reconstructed field moderate
    for b, R in enumerate(p.R_bin):
        cs[b, :, 1:] = spread * p.c_s_max * R * rng.uniform(-1, 1, (cs.shape[1], n - 1)) / np.arange(1, n)
    return c1, cs


def rest_state(model, soc=0.5):
    st = model.uniform_state(soc)
    return st.c1, st.cs


DIRECTIONS = (Direction.CHARGE, Direction.DISCHARGE)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
