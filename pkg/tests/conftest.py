import numpy as np
import pytest

from pid.builtin_systems import (JOINMEET_K3, JOINMEET_K4, KORNER_K1, KORNER_K2, and_system, cex1_system,
                                 cex2_ds_system)
from pid.channels import Channel
from pid.optimize import OptimizerConfig


@pytest.fixture
def k1():
    return Channel.from_rows(KORNER_K1)


@pytest.fixture
def k2():
    return Channel.from_rows(KORNER_K2)


@pytest.fixture
def k3():
    return Channel.from_rows(JOINMEET_K3)


@pytest.fixture
def k4():
    return Channel.from_rows(JOINMEET_K4)


@pytest.fixture
def and_gate():
    return and_system()


@pytest.fixture
def cex1():
    return cex1_system()


@pytest.fixture
def cex2():
    return cex2_ds_system()


@pytest.fixture
def fast_config():
    return OptimizerConfig(num_starts=3, max_iters=100, grid_resolution=6, seed=7)


def random_channel(rng: np.random.Generator, n_in: int, n_out: int) -> Channel:
    return Channel.from_rows(rng.dirichlet(np.ones(n_out), size=n_in))
