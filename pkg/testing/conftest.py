import os

import numpy as np
import pytest

from model.dynamics import PAULI, LocalObservable
from model.interaction import tfim
from model.lattice import FFunction, build_lattice

DATA_FOLDER = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'instance', 'data')


@pytest.fixture(scope='session')
def flask_app():
    from main import app
    app.config.update(TESTING=True)
    return app


@pytest.fixture
def cli_runner(flask_app):
    return flask_app.test_cli_runner()


@pytest.fixture(scope='session')
def chain8():
    return build_lattice('path', [8])


@pytest.fixture(scope='session')
def tfim8(chain8):
    return tfim(chain8, J=1.0, h=1.0)


@pytest.fixture(scope='session')
def power2():
    return FFunction(profile='power', p=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_observable(rng, support, hermitian=True):
    """Random observable of unit operator norm on the given support."""
    n = 2 ** len(support)
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    if hermitian:
        m = m + m.conj().T
    return LocalObservable(support, m / np.linalg.norm(m, 2))


def sigma(site, label):
    return LocalObservable((site,), PAULI[label])


def config_path(name):
    return os.path.join(DATA_FOLDER, name)
