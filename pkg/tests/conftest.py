import numpy as np
import pytest

from mbolab.graph import KernelProfile, build_graph
from mbolab.manifolds import TORUS, DensitySpec, ManifoldSpec, sample_points


@pytest.fixture(scope="session")
def torus():
    return ManifoldSpec(TORUS, 1.0)


@pytest.fixture(scope="session")
def uniform():
    return DensitySpec()


@pytest.fixture(scope="session")
def small_cloud(torus, uniform):
    return sample_points(torus, uniform, 600, 7)


@pytest.fixture(scope="session")
def small_graph(small_cloud):
    g = build_graph(small_cloud, 0.15, KernelProfile("indicator"))
    assert g.connected
    return g


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
