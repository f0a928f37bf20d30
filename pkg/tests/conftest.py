import math
import warnings

import pytest

from coupled_bohm.errors import FirstOrderWarning
from coupled_bohm.model import OscillatorParams
from coupled_bohm.spectral import project_coefficients


@pytest.fixture(autouse=True)
def _quiet_first_order():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FirstOrderWarning)
        yield


@pytest.fixture(scope="session")
def params_marginal():
    """omega_bar = 1, delta_omega/omega_bar = 0.1."""
    return OscillatorParams.from_frequencies(1.0, 0.1)


@pytest.fixture(scope="session")
def params_trajectory():
    """omega_bar = 1, delta_omega/omega_bar = 0.01."""
    return OscillatorParams.from_frequencies(1.0, 0.01)


@pytest.fixture(scope="session")
def spectral_marginal(params_marginal):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FirstOrderWarning)
        return project_coefficients(params=params_marginal)


def length_scale(params):
    f = params.frequencies()
    return math.sqrt(params.hbar / (params.m * f.omega_bar))


#: One status line per acceptance criterion, printed at the end of the session.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
