import math

import numpy as np
import pytest

from dephasewalk import database
from dephasewalk.models import CoinedWalkModel, RingModel

HALF_PI = 0.5 * math.pi


@pytest.fixture
def ring_flat():
    """J1=J2=1, J3=0.5 without flux (first-order crossing)."""
    return RingModel(j1=1.0, j2=1.0, j3=0.5, phi=0.0)


@pytest.fixture
def ring_flux():
    """Same couplings threaded by phi = pi/3 (exceptional point)."""
    return RingModel(j1=1.0, j2=1.0, j3=0.5, phi=math.pi / 3)


@pytest.fixture
def coined3():
    return CoinedWalkModel(L=3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def memory_db():
    database.configure("sqlite://")
    database.init_db()
    yield database
    database.configure("sqlite://")


def same_up_to_sign(a, b, atol):
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return bool(np.max(np.abs(a - b)) <= atol or np.max(np.abs(a + b)) <= atol)
