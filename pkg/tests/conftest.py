import numpy as np
import pytest

from birchlab.forms import CutoffFunction, DEFAULT_CUTOFF, parse_preset


@pytest.fixture
def sphere5():
    return parse_preset("sphere-5")


@pytest.fixture
def sphere4():
    return parse_preset("sphere-4")


@pytest.fixture
def sphere3():
    return parse_preset("sphere-3")


@pytest.fixture
def sphere2():
    return parse_preset("sphere-2")


@pytest.fixture
def cubes2():
    return parse_preset("cubes-2")


@pytest.fixture
def bump():
    return DEFAULT_CUTOFF


@pytest.fixture
def one():
    return CutoffFunction(CutoffFunction.ONE)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
