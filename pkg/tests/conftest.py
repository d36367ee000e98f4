import math

import hypothesis
import pytest

from trapwave.fields import BemSystem, assemble_matrix
from trapwave.geometry import TrapConfig, build_trap, trap_grid
from trapwave.waveform import FrequencyProfile, compile_waveform

hypothesis.settings.register_profile("ci", deadline=None, max_examples=50)
hypothesis.settings.load_profile("ci")

OMEGA = 2 * math.pi * 1.4e6


@pytest.fixture(scope="session")
def trap():
    return build_trap(TrapConfig())


@pytest.fixture(scope="session")
def grid(trap):
    return trap_grid(trap)


@pytest.fixture(scope="session")
def system(trap):
    return BemSystem(trap)


@pytest.fixture(scope="session")
def A(trap, grid, system):
    return assemble_matrix(trap, grid, system)


@pytest.fixture(scope="session")
def A_offset():
    t = build_trap(TrapConfig(wing_offset=20e-6))
    return assemble_matrix(t, trap_grid(t))


@pytest.fixture(scope="session")
def small_trap():
    return build_trap(TrapConfig(segment_count_per_wing=4))


@pytest.fixture(scope="session")
def constant_waveform(A):
    return compile_waveform(A, 3.9e-3, 4.9e-3, FrequencyProfile(OMEGA))


@pytest.fixture(scope="session")
def modulated_waveform(A):
    return compile_waveform(A, 3.9e-3, 4.9e-3, FrequencyProfile(OMEGA, amplitude=0.05))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
