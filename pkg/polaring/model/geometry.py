"""
Ring geometry for a B850-style nanoring.

Sites sit on a circle in the z = 0 plane. Arcs alternate between the
intra-dimer and inter-dimer spacing, and the transition dipoles are
tangential, in-plane, with neighbours pointing head-to-tail.

## How it works

1. The two arc angles must add up to one dimer period, 2*pi/(N/2). Inside that
   constraint the split between them is chosen so the two chords match the
   requested distances in the least-squares sense (the radius always wins).
2. Each dipole starts from the local tangent and is flipped on odd sites.
   Intra-dimer partners are tilted in-plane by +/- psi so that the angles
   between neighbouring dipoles reproduce the two requested values.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from polaring.errors import ModelError
from polaring.units import ANGSTROM_PER_NM

# Published B850 values.
DEFAULT_N_SITES = 16
DEFAULT_RADIUS = 23.0
DEFAULT_DISTANCES = (9.1, 8.9)
DEFAULT_ANGLES = (167.5, 147.5)


@dataclass(frozen=True)
class RingGeometry:
    """Site positions (Å) and unit transition dipoles of a ring."""
    n_sites: int
    radius: float
    intra_dimer_distance: float
    inter_dimer_distance: float
    intra_dimer_angle: float
    inter_dimer_angle: float
    positions: np.ndarray
    dipoles: np.ndarray

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float)
        dipoles = np.asarray(self.dipoles, dtype=float)
        if positions.shape != (self.n_sites, 3) or dipoles.shape != (self.n_sites, 3):
            raise ModelError(
                f"positions and dipoles must both have shape ({self.n_sites}, 3), "
                f"got {positions.shape} and {dipoles.shape}"
            )
        norms = np.linalg.norm(dipoles, axis=1)
        if np.any(np.abs(norms - 1.0) >= 1e-12):
            raise ModelError("transition dipoles must be unit vectors")
        positions.setflags(write=False)
        dipoles.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "dipoles", dipoles)

    @property
    def angular_positions(self) -> np.ndarray:
        """Polar angle of every site in radians."""
        return np.arctan2(self.positions[:, 1], self.positions[:, 0])

    def pair_vectors(self) -> np.ndarray:
        """r_ij = r_j - r_i for all pairs, shape (N, N, 3)."""
        return self.positions[None, :, :] - self.positions[:, None, :]

    def chord_distances_nm(self, site: int) -> np.ndarray:
        """Euclidean distance (nm) from ``site`` to every site."""
        return np.linalg.norm(self.positions - self.positions[site], axis=1) / ANGSTROM_PER_NM

    def arc_distances_nm(self, site: int) -> np.ndarray:
        """Shortest distance along the ring (nm) from ``site`` to every site."""
        dphi = np.abs(self.angular_positions - self.angular_positions[site])
        dphi = np.minimum(dphi, 2.0 * math.pi - dphi)
        return self.radius * dphi / ANGSTROM_PER_NM

    def dipole_products(self) -> np.ndarray:
        """Matrix of dipole dot products d_i . d_j."""
        return self.dipoles @ self.dipoles.T


def _solve_arc_angles(radius: float, distances: Tuple[float, float], period: float) -> Tuple[float, float]:
    d1, d2 = distances

    def misfit(delta: float) -> float:
        theta1 = 0.5 * period + delta
        theta2 = 0.5 * period - delta
        c1 = 2.0 * radius * math.sin(0.5 * theta1)
        c2 = 2.0 * radius * math.sin(0.5 * theta2)
        return (c1 - d1) ** 2 + (c2 - d2) ** 2

    half = 0.5 * period
    result = minimize_scalar(misfit, bounds=(-half, half), method="bounded", options={"xatol": 1e-14})
    delta = float(result.x)
    return half + delta, half - delta


def build_geometry(
    n_sites: int = DEFAULT_N_SITES,
    radius: float = DEFAULT_RADIUS,
    distances: Tuple[float, float] = DEFAULT_DISTANCES,
    angles: Tuple[float, float] = DEFAULT_ANGLES,
) -> RingGeometry:
    """
    Build a dimerized ring.

    Args:
        n_sites: Number of chromophores (even, at least 4)
        radius: Ring radius in Å
        distances: (intra-dimer, inter-dimer) nearest-neighbour distances in Å
        angles: (intra-dimer, inter-dimer) angles between neighbouring dipoles in degrees

    Returns:
        RingGeometry with site 0 at polar angle 0 and bond (0, 1) intra-dimer.
    """
    if n_sites < 4 or n_sites % 2:
        raise ModelError(f"n_sites must be even and >= 4, got {n_sites}")
    if radius <= 0:
        raise ModelError(f"radius must be positive, got {radius}")
    d1, d2 = (float(d) for d in distances)
    if d1 <= 0 or d2 <= 0:
        raise ModelError(f"distances must be positive, got {distances}")
    if 0.5 * n_sites * (d1 + d2) > 2.0 * math.pi * radius:
        raise ModelError(
            f"chords {d1} + {d2} Å repeated {n_sites // 2} times exceed the "
            f"circumference of a {radius} Å ring"
        )

    period = 2.0 * math.pi / (n_sites // 2)
    theta1, theta2 = _solve_arc_angles(radius, (d1, d2), period)

    a1, a2 = (math.radians(float(a)) for a in angles)
    psi = 0.25 * (a1 - a2 + theta1 - theta2)

    arcs = np.where(np.arange(n_sites) % 2 == 0, theta1, theta2)
    phi = np.concatenate(([0.0], np.cumsum(arcs[:-1])))
    positions = np.column_stack([radius * np.cos(phi), radius * np.sin(phi), np.zeros(n_sites)])

    parity = np.where(np.arange(n_sites) % 2 == 0, 1.0, -1.0)
    direction = phi + 0.5 * math.pi + parity * psi
    dipoles = parity[:, None] * np.column_stack([np.cos(direction), np.sin(direction), np.zeros(n_sites)])
    # renormalize to remove rounding from cos/sin
    dipoles /= np.linalg.norm(dipoles, axis=1)[:, None]

    return RingGeometry(
        n_sites=n_sites,
        radius=float(radius),
        intra_dimer_distance=d1,
        inter_dimer_distance=d2,
        intra_dimer_angle=float(angles[0]),
        inter_dimer_angle=float(angles[1]),
        positions=positions,
        dipoles=dipoles,
    )
