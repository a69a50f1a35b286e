import numpy as np
import pytest

from qfcs import vmodel


@pytest.fixture(scope="session")
def fig2_params():
    return vmodel.preset("fig2")


@pytest.fixture(scope="session")
def fig2_system(fig2_params):
    return vmodel.v_system(fig2_params)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_vparams(rng, *, delta_max_frac=0.9, equilibrium=False):
    nu = rng.uniform(0.5, 2.0)
    T_L = rng.uniform(0.5, 8.0)
    T_R = T_L if equilibrium else rng.uniform(0.5, 8.0)
    return vmodel.VParams(
        nu=nu,
        delta=rng.uniform(0.0, delta_max_frac) * nu,
        alpha=rng.uniform(-1.0, 1.0),
        a=rng.uniform(0.002, 0.05),
        T_L=T_L,
        T_R=T_R,
    )
