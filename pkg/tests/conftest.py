import numpy as np
import pytest

from anderson_edge.config import DEFAULT_CONFIG, parse_config, tomllib
from anderson_edge.operators import AndersonModel
from anderson_edge.potential import PeriodicBackground, build_single_site

DEFAULT_BUMPS = [((-0.25,), 0.15, 2.0), ((0.25,), 0.15, -1.2)]


def make_family(bumps=DEFAULT_BUMPS, background=None, n=32, d=1, lo=0.5, hi=1.5):
    background = PeriodicBackground.cosine(1.0, d) if background is None else background
    return AndersonModel(background, build_single_site(bumps, d, 1.0 / n), n, lo, hi)


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


@pytest.fixture(scope="session")
def default_family():
    return make_family()


@pytest.fixture(scope="session")
def mirrored_family():
    return make_family([(c, r, -a) for c, r, a in DEFAULT_BUMPS])


@pytest.fixture(scope="session")
def default_config():
    return parse_config(tomllib.loads(DEFAULT_CONFIG))


@pytest.fixture(scope="session")
def default_scan(default_family):
    from anderson_edge.coupling import lambda_threshold_scan

    return lambda_threshold_scan(default_family, np.arange(17.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
