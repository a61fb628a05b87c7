"""Shared fixtures: seeded generators, constellations and the two scenarios."""
import numpy as np
import pytest

from models import CoordinateConfig, parse_scenario
from sigproc import get_constellation


def complex_gaussian(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@pytest.fixture
def cgauss(rng):
    """Draw CN(0, 1) arrays of the given shape from the seeded generator."""
    return lambda *shape: complex_gaussian(rng, *shape)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def qpsk():
    return get_constellation("qpsk")


@pytest.fixture
def qam16():
    return get_constellation("16qam")


@pytest.fixture
def overloaded():
    """(3,3,3,3)x8 with two streams per user."""
    return parse_scenario("3,3,3,3x8", streams="2,2,2,2")


@pytest.fixture
def square():
    """(2,2,2,2)x8: r = N_r = N_t."""
    return parse_scenario("2,2,2,2x8")


@pytest.fixture
def identity_cfg():
    return CoordinateConfig(init_mode="identity")
