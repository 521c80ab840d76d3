import numpy as np
import pytest

from randmaps.catalog import make_system
from randmaps.measures import DiscreteMeasure, dirac


@pytest.fixture
def dyadic():
    return make_system("dyadic")


@pytest.fixture
def low_slope():
    """Doubling left branch with S_beta(x) = 2^-beta (2x - 1)."""
    def build(atoms=(1.0,), weights=None):
        weights = weights or (1.0 / len(atoms),) * len(atoms)
        return make_system("linear-low-slope", nu_B=DiscreteMeasure(tuple(map(float, atoms)), weights))
    return build


@pytest.fixture
def lsv_const():
    def build(alpha):
        return make_system("lsv", nu_A=dirac(alpha))
    return build


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
