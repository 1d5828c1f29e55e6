"""Shared fixtures.

The compiled kernels JIT on first call; pay that once per session so no
individual test (especially the timing ones) eats the compile latency.
"""

import numpy as np
import pytest

from geoshield import _kernels as _k
from geoshield.safety_filter import GeofenceBox, GeofenceFilter, PendulumShield


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    filt = GeofenceFilter(
        GeofenceBox(np.array([0.0, 0.0, 10.0]), np.array([10.0, 10.0, 9.5]))
    )
    filt.warm_up()
    PendulumShield().filter(0.0, 0.0, 0.0)
    _k.pend_filter_u(0.0, 0.0, 0.0, 9.0, 6.6, 5.0, 100.0, 0.01, 200)
