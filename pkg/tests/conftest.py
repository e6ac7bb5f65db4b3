import numpy as np
import pytest

from medsense import SystemGeometry, build_model
from medsense.detector import DetectorConfig
from medsense.model import noise_covariance

M, K, RHO = 8, 10, 0.2


@pytest.fixture(scope="session")
def R_w():
    return noise_covariance(M, RHO, 1.0)


@pytest.fixture(scope="session")
def null_cfg(R_w):
    return DetectorConfig(R_w, R_w, K)


@pytest.fixture(scope="session")
def geom():
    return SystemGeometry()


@pytest.fixture(scope="session")
def system_n32(geom):
    return build_model(geom, rho=RHO, upsilon_db=-10.0, ris_mode="optimal")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
