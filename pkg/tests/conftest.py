"""Shared fixtures: small radial grids, built-in links and potentials."""

import math

import numpy as np
import pytest

from freeres import ModeFunction, build_grid
from potentials import load_potential
from propagate import gaussian_bump
from schemas import CircleLink, SphereLink


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(3, 10.0, 128)


@pytest.fixture(scope="session")
def propagation_grid():
    return build_grid(3, 12.0, 256)


@pytest.fixture(scope="session")
def gaussian(small_grid):
    return load_potential("gaussian", a=0.5, w=1.0, sigma=3.0, grid=small_grid)


@pytest.fixture(scope="session")
def zero(small_grid):
    return load_potential("zero", grid=small_grid)


@pytest.fixture(scope="session")
def bump(propagation_grid):
    return ModeFunction.from_function(propagation_grid, gaussian_bump(3.0, 0.7))


@pytest.fixture
def sphere():
    return SphereLink(dim=2)


@pytest.fixture
def circle():
    return CircleLink(circumference=2.0 * math.pi)


def relative_gap(values, reference):
    return float(np.max(np.abs(np.asarray(values) - np.asarray(reference))) / np.max(np.abs(reference)))
