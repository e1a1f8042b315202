import numpy as np
import pytest

from carnotwave.groups import (
    free_two_step_3,
    heisenberg,
    heisenberg_nonisotropic,
    htype_quaternion,
)
from carnotwave.rng import make_rng


@pytest.fixture(scope="session")
def hei():
    return heisenberg()


@pytest.fixture(scope="session")
def hei_aniso():
    return heisenberg_nonisotropic()


@pytest.fixture(scope="session")
def quat():
    return htype_quaternion()


@pytest.fixture(scope="session")
def free3():
    return free_two_step_3()


@pytest.fixture(scope="session")
def metivier_groups(hei, hei_aniso, quat):
    return [hei, hei_aniso, quat]


@pytest.fixture(scope="session")
def all_groups(metivier_groups, free3):
    return metivier_groups + [free3]


@pytest.fixture()
def rng():
    return make_rng(1234, 7)


def random_covector(rng, g, xi_scale=1.0, mu_scale=1.0):
    from carnotwave.groups import Covector

    xi = rng.standard_normal(g.d1)
    while np.linalg.norm(xi) < 0.3:
        xi = rng.standard_normal(g.d1)
    mu = rng.standard_normal(g.d2)
    while np.linalg.norm(mu) < 0.3:
        mu = rng.standard_normal(g.d2)
    return Covector(xi_scale * xi, mu_scale * mu)


def random_point(rng, g, scale=1.0):
    from carnotwave.groups import Point

    return Point(scale * rng.standard_normal(g.d1), scale * rng.standard_normal(g.d2))
