import sys
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from capflow.grid import GridSpec
from capflow.state import PhysicalParams
from capflow.stokes import CompatibilityWarning

settings.register_profile("capflow", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("capflow")


@pytest.fixture
def params():
    return PhysicalParams(rho1=1.0, rho2=2.0, mu1=1.0, mu2=3.0, sigma=1.5)


@pytest.fixture
def small_grid():
    return GridSpec(Nx=16, Ny=12, dt=0.05, t0=0.5)


@pytest.fixture
def grid():
    return GridSpec(Nx=32, Ny=24, dt=0.025, t0=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def quiet_compat():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CompatibilityWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
