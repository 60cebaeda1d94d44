import numpy as np
import pytest

from rackoid.kernel import ManifoldSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def T2():
    return ManifoldSpec.torus(2)


@pytest.fixture
def T3():
    return ManifoldSpec.torus(3)


@pytest.fixture
def C2():
    return ManifoldSpec.chart(2)
