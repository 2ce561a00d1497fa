"""
Fixtures partagées: petits espaces d'états et générateurs associés.
"""

import numpy as np
import pytest

from tazrp.configspace import enumerate_space, partition_wells
from tazrp.generator import build_all


@pytest.fixture
def space_332():
    """L=3, N=3, α=2 (10 états)."""
    return enumerate_space(3, 3, 2.0)


@pytest.fixture
def space_362():
    """L=3, N=6, α=2 (28 états)."""
    return enumerate_space(3, 6, 2.0)


@pytest.fixture
def wells_362(space_362):
    return partition_wells(space_362, 1)


@pytest.fixture
def ops_362(space_362):
    return build_all(space_362)


@pytest.fixture
def space_3124():
    """L=3, N=12, α=4 (91 états)."""
    return enumerate_space(3, 12, 4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)
