import numpy as np
import pytest

from blochdegen.lattice import PhysicalConstants, TriclinicLattice, default_lattice
from blochdegen.potentials import random_fourier_potential

GENERIC_K = np.array([0.137, 0.211, 0.093])


@pytest.fixture(scope="session")
def lattice():
    return default_lattice()


@pytest.fixture(scope="session")
def cubic():
    return TriclinicLattice.from_vectors((1, 0, 0), (0, 1, 0), (0, 0, 1))


@pytest.fixture(scope="session")
def constants():
    return PhysicalConstants(so_scale=1e4)


@pytest.fixture(scope="session")
def v0(lattice):
    return random_fourier_potential(lattice, 1, "even", 3, 0.2, 0.6)


@pytest.fixture(scope="session")
def phi(lattice):
    return random_fourier_potential(lattice, 2, "odd", 3, 0.02, 0.6)
