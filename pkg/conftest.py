"""
Shared pytest fixtures: the default pump and the degenerate-cut 5 mm BBO crystal
"""

import pytest

from biphoton.phasematch import PumpSpec, degenerate_crystal


@pytest.fixture(scope='session')
def pump():
    return PumpSpec()


@pytest.fixture(scope='session')
def crystal(pump):
    return degenerate_crystal(pump)
