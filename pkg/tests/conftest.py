import numpy as np
import pytest

from cflsim.orchestrator import RunParams
from cflsim.synthdata import generate_population, make_unbalanced


@pytest.fixture(scope="session")
def tiny_population():
    """12 clients, 2 edges, 2 distributions; small datasets for fast runs."""
    return generate_population(seed=7, n_clients=12, n_edges=2, n_dists=2,
                               samples_range=(40, 60))


@pytest.fixture(scope="session")
def flat_population():
    """8 congruent clients (J=1) over 2 edges."""
    return generate_population(seed=3, n_clients=8, n_edges=2, n_dists=1,
                               samples_range=(40, 50))


@pytest.fixture(scope="session")
def reference_population():
    """The acceptance-scale population: 40 clients, 2 edges, 4 distributions,
    unbalanced dataset sizes."""
    pop = generate_population(seed=11, n_clients=40, n_edges=2, n_dists=4,
                              samples_range=(80, 120), noise_sigma=0.45)
    return make_unbalanced(pop, 4.0)


@pytest.fixture
def fast_params():
    return RunParams(epochs=2, batch=16, lr=0.3)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
