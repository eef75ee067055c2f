"""
Reduced exciton density matrix and the measures built on it.

    rho_nm = alpha_n^* alpha_m S_nm

Every function takes a ReducedDensityMatrix or a plain array; arrays may
carry leading axes (time, realization) and the result keeps them.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from polaring.dynamics.eom import debye_waller_matrix
from polaring.dynamics.state import D1State
from polaring.model.bath import momentum_grid

PRINTED_IPR_EXPONENT = 4
DEFAULT_IPR_EXPONENT = 2


@dataclass(frozen=True)
class ReducedDensityMatrix:
    rho: np.ndarray
    time: float = 0.0

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    @property
    def populations(self) -> np.ndarray:
        return np.diagonal(self.rho).real


RhoLike = Union[ReducedDensityMatrix, np.ndarray]


def _rho(rho: RhoLike) -> np.ndarray:
    return rho.rho if isinstance(rho, ReducedDensityMatrix) else np.asarray(rho)


def _scalar(value: np.ndarray):
    return float(value) if np.ndim(value) == 0 else value


def density_from_arrays(alpha: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """rho for (possibly batched) amplitude and displacement arrays."""
    s = debye_waller_matrix(lam)
    return alpha.conj()[..., :, None] * alpha[..., None, :] * s


def reduced_density(state: D1State) -> ReducedDensityMatrix:
    return ReducedDensityMatrix(density_from_arrays(state.alpha, state.lam), state.time)


def _trace(rho: np.ndarray) -> np.ndarray:
    trace = np.trace(rho, axis1=-2, axis2=-1).real
    if np.any(trace <= 0.0):
        raise ValueError("density matrix has zero trace")
    return trace


def coherence_size(rho: RhoLike):
    """L_c = (sum |rho_nm|)^2 / (N sum |rho_nm|^2), in sites."""
    rho = _rho(rho)
    _trace(rho)
    n = rho.shape[-1]
    mag = np.abs(rho)
    return _scalar(np.sum(mag, axis=(-2, -1)) ** 2 / (n * np.sum(mag**2, axis=(-2, -1))))


def inverse_population_ratio(rho: RhoLike, exponent: int = DEFAULT_IPR_EXPONENT):
    """
    1 / sum_n p_n^exponent on trace-normalized populations.

    exponent=2 counts N sites for a uniform mixture; exponent=4 is the
    fourth-power variant, which gives N^3 there.
    """
    rho = _rho(rho)
    trace = _trace(rho)
    pops = np.diagonal(rho, axis1=-2, axis2=-1).real / trace[..., None]
    return _scalar(1.0 / np.sum(np.abs(pops) ** exponent, axis=-1))


def superradiance_factor(rho: RhoLike, dipoles: np.ndarray):
    """L_s = Re sum_nm (d_n . d_m) rho_nm, in units of one chromophore's rate."""
    rho = _rho(rho)
    products = np.asarray(dipoles) @ np.asarray(dipoles).T
    return _scalar(np.sum(products * rho, axis=(-2, -1)).real)


def momentum_populations(rho: RhoLike) -> np.ndarray:
    """n_k = (1/N) sum_nm e^(ik(n-m)) rho_nm on the bath momentum grid."""
    rho = _rho(rho)
    n = rho.shape[-1]
    waves = np.exp(-1j * np.outer(momentum_grid(n), np.arange(n)))
    return np.einsum("kn,...nm,km->...k", waves.conj(), rho, waves).real / n
