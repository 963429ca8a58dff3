import os
import sys

import pytest

# Add src directory to Python path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "src"))

from group import ball, bend, fuchsian_inclusion  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: large balls and long orbits")


@pytest.fixture(scope="session")
def ball_8():
    return ball(8.0)


@pytest.fixture(scope="session")
def ball_11():
    return ball(11.0)


@pytest.fixture(scope="session")
def fuchsian():
    return fuchsian_inclusion()


@pytest.fixture(scope="session")
def bent():
    return bend(fuchsian_inclusion(), 0.3)
