import math

import numpy as np
import pytest

from snbumps.acceptance import Context, synthetic_problem
from snbumps.groundstate import extract_constants, solve_ground_state

# Reference values computed once with the default solver settings
# (tolerance 1e-10, r_max 30, 6000 nodes) and cross-checked against the
# collocation oracle and the shell-theorem double quadrature.
FROZEN = {
    "A1": 88.09854433813462,
    "A2": 2952.210556637794,
    "lambda3": 3.5053297026533032,
    "energy_shift": 0.692228684925702,
    "u0": 1.44460930582,
}


@pytest.fixture(scope="session")
def ctx():
    return Context(seed=0)


@pytest.fixture(scope="session")
def gs(ctx):
    return ctx.gs


@pytest.fixture(scope="session")
def constants(ctx):
    return ctx.constants


@pytest.fixture(scope="session")
def tables(ctx):
    return ctx.tables


@pytest.fixture(scope="session")
def coarse_problem(ctx):
    """m = 4, gaps 15, spacing 0.8: cheap enough for operator identities."""
    return synthetic_problem(ctx, "m4-sep15", spacing=0.8, margin=16.0, decay_tol=1e-5)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


def rel(a, b):
    return abs(a - b) / abs(b)
