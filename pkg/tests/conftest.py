"""Shared fixtures."""

import pytest

from layerapprox.core_math import make_grid
from layerapprox.shallow import FitConfig

SMALL_POINTS_PER_DIM = {1: 65, 2: 17, 3: 9}


@pytest.fixture
def fast_cfg():
    """Few restarts and iterations; bookkeeping identities hold regardless."""
    return FitConfig(restarts=2, iterations=300)


@pytest.fixture
def small_grid():
    """Build a coarse measurement grid for a dimension."""

    def build(n):
        return make_grid(n, SMALL_POINTS_PER_DIM[n])

    return build
