import math

import numpy as np
import pytest

import berglab as bl


@pytest.fixture(scope="session")
def disc():
    return bl.build_domain("disc", (1.0,))


@pytest.fixture(scope="session")
def polydisc():
    return bl.build_domain("polydisc", (1.0, 1.0))


@pytest.fixture(scope="session")
def disc_rule(disc):
    """Plain 64 x 64 rule on the unit disc (moment-exact to degree ~120)."""
    return bl.build_quadrature(disc, 64, 64)


@pytest.fixture(scope="session")
def refined_disc_rule(disc):
    """Dyadic-ladder rule resolving log singularities at the origin."""
    return bl.build_quadrature(disc, 16, 64, levels=72, singular_loci=[(1.0,)])


@pytest.fixture(scope="session")
def bounded_pair(disc):
    """The standard bounded weight pair max(1.5 ln|z|, -5), max(1.9 ln|z|, -5)."""
    phi = bl.enforce_negative(bl.truncate(bl.LogAbsLinear((1.0,), 1.5), 5), disc)
    psi = bl.enforce_negative(bl.truncate(bl.LogAbsLinear((1.0,), 1.9), 5), disc)
    return phi, psi
