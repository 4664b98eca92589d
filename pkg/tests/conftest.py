import numpy as np
import pytest

from braggsim import default_rb87, MomentumDistribution

TWO_PI = 2 * np.pi


@pytest.fixture(scope="session")
def rb87():
    return default_rb87()


@pytest.fixture(scope="session")
def cloud():
    """The experiment's fitted momentum spread."""
    return MomentumDistribution("gaussian", 0.0, 0.13)
