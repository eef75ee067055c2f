"""
Dispersive intramolecular phonon bath.

One mode per site momentum q_i = (2*pi/N)(-N/2 + i + 1). The dispersion is
linear in |q| and spans [omega0 (1 - W), omega0 (1 + W)]:

    omega_q = omega0 + 2 W omega0 (|q|/pi - 1/2)

Mode couplings follow an elliptic spectral density centred on omega0 with
half-width W*omega0, discretized on the mode grid and then rescaled so that
(1/N) sum_q g_q^2 omega_q = S omega0 exactly.
"""

import math
from dataclasses import dataclass

import numpy as np

from polaring.errors import ModelError
from polaring.units import CM1_TO_RAD_PER_FS

DEFAULT_OMEGA0 = 1670.0
DEFAULT_BANDWIDTH = 0.5
DEFAULT_HUANG_RHYS = 0.5


def momentum_grid(n: int) -> np.ndarray:
    """The N momenta shared by phonon modes and exciton momentum populations."""
    return (2.0 * math.pi / n) * (-0.5 * n + np.arange(n) + 1.0)


def reversed_momentum_index(n: int) -> np.ndarray:
    """Index j of -q_i on the grid for every i (q = pi maps onto itself)."""
    return (n - 2 - np.arange(n)) % n


@dataclass(frozen=True)
class PhononBath:
    """Mode grid, frequencies (cm⁻¹) and dimensionless couplings."""
    n_modes: int
    omega0: float
    bandwidth_w: float
    huang_rhys: float
    q_grid: np.ndarray
    omega_q: np.ndarray
    g_q: np.ndarray

    def __post_init__(self):
        for name in ("q_grid", "omega_q", "g_q"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (self.n_modes,):
                raise ModelError(f"{name} must have length {self.n_modes}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def omega_q_rad(self) -> np.ndarray:
        """Mode frequencies in rad/fs."""
        return self.omega_q * CM1_TO_RAD_PER_FS

    @property
    def omega0_rad(self) -> float:
        return self.omega0 * CM1_TO_RAD_PER_FS

    @property
    def reorganization_energy(self) -> float:
        """(1/N) sum_q g_q^2 omega_q in cm⁻¹; equals S*omega0."""
        return float(np.sum(self.g_q**2 * self.omega_q) / self.n_modes)

    @property
    def is_coupled(self) -> bool:
        return bool(np.any(self.g_q != 0.0))

    def spectral_density(self, omega) -> np.ndarray:
        """Elliptic J00(omega) in cm⁻¹ with half-width W*omega0 (zero outside the band)."""
        omega = np.asarray(omega, dtype=float)
        half = self.bandwidth_w * self.omega0
        if half == 0.0:
            return np.zeros_like(omega)
        return _elliptic(omega, self.omega0, half, self.huang_rhys, self.n_modes)

    def site_phases(self) -> np.ndarray:
        """e^(-i q n) for site n (rows) and mode q (columns)."""
        n = np.arange(self.n_modes)
        return np.exp(-1j * np.outer(n, self.q_grid))


def _elliptic(omega: np.ndarray, omega0: float, half: float, s: float, n: int) -> np.ndarray:
    root = np.sqrt(np.clip(half**2 - (omega - omega0) ** 2, 0.0, None))
    return 2.0 * s * omega**2 / (n * math.pi * half**2) * root


def build_phonon_bath(
    n: int,
    omega0: float = DEFAULT_OMEGA0,
    W: float = DEFAULT_BANDWIDTH,
    S: float = DEFAULT_HUANG_RHYS,
) -> PhononBath:
    """
    Build the bath for an N-site ring.

    Args:
        n: Number of modes (equal to the number of sites)
        omega0: Band centre in cm⁻¹
        W: Relative bandwidth in [0, 1]
        S: Huang-Rhys factor

    Returns:
        PhononBath with g_q even in q. W = 0 gives the Einstein limit with
        equal couplings g_q^2 = S.
    """
    if n < 1:
        raise ModelError(f"need at least one mode, got {n}")
    if not 0.0 <= W <= 1.0:
        raise ModelError(f"bandwidth W must lie in [0, 1], got {W}")
    if not S >= 0.0:
        raise ModelError(f"Huang-Rhys factor must be >= 0, got {S}")
    if not omega0 > 0.0:
        raise ModelError(f"omega0 must be positive, got {omega0}")

    q = momentum_grid(n)
    omega = omega0 + 2.0 * W * omega0 * (np.abs(q) / math.pi - 0.5)

    if S == 0.0:
        g = np.zeros(n)
    elif W == 0.0:
        g = np.full(n, math.sqrt(S))
    else:
        d_omega = 2.0 * W * omega0 / n
        # half a grid step of padding keeps the edge modes coupled
        half = W * omega0 + 0.5 * d_omega
        raw = n * _elliptic(omega, omega0, half, S, n) * d_omega / omega**2
        raw *= S * omega0 / (np.sum(raw * omega) / n)
        g = np.sqrt(raw)

    return PhononBath(
        n_modes=n,
        omega0=float(omega0),
        bandwidth_w=float(W),
        huang_rhys=float(S),
        q_grid=q,
        omega_q=omega,
        g_q=g,
    )
