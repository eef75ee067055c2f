"""Shared fixtures: the default B850 ring, its clean model and bath, and small toy rings."""

import numpy as np
import pytest

from polaring.model.bath import build_phonon_bath
from polaring.model.exciton import build_exciton_matrix
from polaring.model.geometry import build_geometry


@pytest.fixture(scope="session")
def geometry():
    return build_geometry()


@pytest.fixture(scope="session")
def clean_model(geometry):
    return build_exciton_matrix(geometry)


@pytest.fixture(scope="session")
def bath():
    return build_phonon_bath(16)


@pytest.fixture(scope="session")
def uncoupled_bath():
    return build_phonon_bath(16, S=0.0)


def ring_matrix(n: int, coupling: float, energies=None) -> np.ndarray:
    """Nearest-neighbour ring in cm⁻¹ with optional site energies."""
    k = np.zeros((n, n))
    for i in range(n):
        k[i, (i + 1) % n] = k[(i + 1) % n, i] = coupling
    if energies is not None:
        k[np.diag_indices(n)] = energies
    return k


@pytest.fixture
def trimer():
    return ring_matrix(3, 300.0, energies=[0.0, 40.0, -25.0])


@pytest.fixture
def make_ring():
    return ring_matrix
