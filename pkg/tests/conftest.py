"""Shared fixtures: reference systems and a tight integrator config.

Expensive settled orbits are session-scoped so the poincare and classify
suites reuse one integration instead of repeating the transient burn-in.
"""

import numpy as np
import pytest

from nakduo.ode import field_coupled, integrate, plane
from nakduo.params import IntegratorConfig, default_pair


@pytest.fixture(scope="session")
def tight():
    return IntegratorConfig(rtol=1e-9, atol=1e-11)


@pytest.fixture(scope="session")
def pair():
    return default_pair(0.05)


def settle(c, y0, ms, config):
    sol = integrate(field_coupled(c), np.asarray(y0, dtype=float),
                    (0.0, ms), config)
    return sol.y_end


@pytest.fixture(scope="session")
def torus_state(tight):
    """A state on the torus attractor at weak coupling (q2 = 0.04)."""
    c = default_pair(0.04)
    return c, settle(c, (-20.0, 0.3, -20.0, 0.4), 4000.0, tight)


@pytest.fixture(scope="session")
def section_v2():
    return plane(2, -50.0, direction=1)
