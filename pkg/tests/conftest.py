import numpy as np
import pytest

from flyqc.emitter import EmitterModel
from flyqc.propagation import ControlPulse, TimeGrid

MHZ = 2 * np.pi * 1e-3  # rad/ns per MHz

_ACCEPTANCE_LINES = []


def random_pulse(rng, n_steps, u_max=0.1, gamma_mean=5 * MHZ, smooth=True):
    """Random drive/coupling; smooth pulses are sine series, the rest white noise."""
    if smooth:
        t = (np.arange(n_steps) + 0.5) / n_steps
        k = np.arange(1, 7)
        basis = np.sin(np.pi * np.outer(t, k))
        c = rng.uniform(-1, 1, size=(3, k.size)) / np.sqrt(k.size)
        ux, uy = u_max * basis @ c[0], u_max * basis @ c[1]
        gamma = gamma_mean * (1 + 0.5 * basis @ c[2])
    else:
        ux, uy = rng.uniform(-u_max, u_max, (2, n_steps))
        gamma = gamma_mean * rng.uniform(0.5, 1.5, n_steps)
    return ControlPulse(ux, uy, np.clip(gamma, 0.05 * gamma_mean, None))


@pytest.fixture
def transmon():
    return EmitterModel(5, -200 * MHZ)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def short_grid():
    return TimeGrid.from_dt(20.0, 0.5)


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one pass/fail line per acceptance criterion."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
