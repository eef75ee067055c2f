"""
Lattice displacement field and energy bookkeeping of a D1 state.
"""

import math
from typing import NamedTuple, Union

import numpy as np

from polaring.dynamics.eom import debye_waller_matrix
from polaring.dynamics.state import D1State
from polaring.model.bath import PhononBath, momentum_grid
from polaring.model.exciton import ExcitonMatrix


class EnergyComponents(NamedTuple):
    """Energies in units of omega0."""
    e_ex: float
    e_bath: float
    e_int: float
    e_total: float


def displacement_from_arrays(alpha: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """xi_n = (1/sqrt N) sum_q sum_n' |alpha_n'|^2 Re(e^(iqn) lam_n'q)."""
    n = alpha.shape[-1]
    q = momentum_grid(lam.shape[-1])
    weighted = np.einsum("...n,...nq->...q", np.abs(alpha) ** 2, lam)
    waves = np.exp(1j * np.outer(np.arange(n), q))
    return np.einsum("nq,...q->...n", waves, weighted).real / math.sqrt(n)


def phonon_displacement(state: D1State) -> np.ndarray:
    return displacement_from_arrays(state.alpha, state.lam)


def energies_from_arrays(alpha: np.ndarray, lam: np.ndarray, k: np.ndarray, baseline: float, bath: PhononBath):
    """(e_ex, e_bath, e_int) arrays in omega0 units; energies from cm⁻¹ inputs."""
    n = alpha.shape[-1]
    weights = np.abs(alpha) ** 2
    s = debye_waller_matrix(lam)
    e_ex = np.einsum("...n,...nm,...m->...", alpha.conj(), k * s, alpha).real
    e_ex = e_ex - baseline * np.sum(weights, axis=-1)
    e_bath = np.sum(weights * np.sum(bath.omega_q * np.abs(lam) ** 2, axis=-1), axis=-1)
    phase = bath.site_phases()
    e_int = -2.0 / math.sqrt(n) * np.sum(
        weights * np.sum(bath.omega_q * bath.g_q * (phase * lam.conj()).real, axis=-1), axis=-1
    )
    return e_ex / bath.omega0, e_bath / bath.omega0, e_int / bath.omega0


def energy_components(state: D1State, model: Union[ExcitonMatrix, np.ndarray], bath: PhononBath) -> EnergyComponents:
    """Exciton, bath and interaction energies; the exciton part excludes the site-energy baseline."""
    if isinstance(model, ExcitonMatrix):
        k, baseline = model.k, model.baseline
    else:
        k, baseline = np.asarray(model, dtype=float), 0.0
    e_ex, e_bath, e_int = energies_from_arrays(state.alpha, state.lam, k, baseline, bath)
    return EnergyComponents(float(e_ex), float(e_bath), float(e_int), float(e_ex + e_bath + e_int))
