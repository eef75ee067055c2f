"""
Frenkel exciton matrix of the ring.

K_nm holds the site energies on the diagonal, the alternating intra/inter
dimer couplings J1, J2 on the nearest-neighbour bonds, and point-dipole
couplings between every other pair:

    W_ij = C [ d_i.d_j / r^3 - 3 (d_i.r)(d_j.r) / r^5 ]

Disorder shifts the diagonal and the nearest-neighbour bonds only; the
long-range terms always come from the clean geometry.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from polaring.errors import ModelError
from polaring.model.geometry import RingGeometry
from polaring.units import CM1_TO_RAD_PER_FS


@dataclass(frozen=True)
class CouplingParams:
    """Coupling constants in cm⁻¹ (dipole constant in Å³·cm⁻¹)."""
    j1_intra: float = 594.0
    j2_inter: float = 491.0
    dipole_constant: float = 640725.0
    site_energy_baseline: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.j1_intra) or not np.isfinite(self.j2_inter):
            raise ModelError("nearest-neighbour couplings must be finite")
        if not self.dipole_constant > 0:
            raise ModelError(f"dipole constant must be positive, got {self.dipole_constant}")

    @property
    def mean_coupling(self) -> float:
        return 0.5 * (self.j1_intra + self.j2_inter)


@dataclass(frozen=True)
class ExcitonMatrix:
    """Real symmetric exciton matrix in cm⁻¹."""
    k: np.ndarray
    baseline: float = 0.0

    def __post_init__(self):
        k = np.array(self.k, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ModelError(f"exciton matrix must be square, got shape {k.shape}")
        if not np.all(np.isfinite(k)):
            raise ModelError("exciton matrix has non-finite entries")
        if not np.array_equal(k, k.T):
            raise ModelError("exciton matrix must be exactly symmetric")
        k.setflags(write=False)
        object.__setattr__(self, "k", k)

    @property
    def n_sites(self) -> int:
        return self.k.shape[0]

    def in_rad_per_fs(self) -> np.ndarray:
        """K converted to angular frequencies for the equations of motion."""
        return self.k * CM1_TO_RAD_PER_FS

    def shifted(self, constant: float) -> "ExcitonMatrix":
        """Same matrix with ``constant`` added to every site energy."""
        return ExcitonMatrix(self.k + constant * np.eye(self.n_sites), self.baseline + constant)


def dipole_coupling(geom: RingGeometry, dipole_constant: float) -> np.ndarray:
    """
    Point-dipole coupling between all site pairs (cm⁻¹), zero diagonal.

    Raises:
        ModelError: if two distinct sites coincide
    """
    r = geom.pair_vectors()
    dist = np.linalg.norm(r, axis=-1)
    off = ~np.eye(geom.n_sites, dtype=bool)
    if np.any(dist[off] == 0.0):
        raise ModelError("two sites share a position; dipole coupling is singular")
    d = geom.dipoles
    safe = np.where(off, dist, 1.0)
    dd = d @ d.T
    di_r = np.einsum("ik,ijk->ij", d, r)
    dj_r = np.einsum("jk,ijk->ij", d, r)
    w = dipole_constant * (dd / safe**3 - 3.0 * di_r * dj_r / safe**5)
    w = np.where(off, w, 0.0)
    return 0.5 * (w + w.T)


def build_exciton_matrix(
    geom: RingGeometry,
    params: Optional[CouplingParams] = None,
    shifts: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> ExcitonMatrix:
    """
    Assemble K for one realization.

    Args:
        geom: Ring geometry
        params: Coupling constants (published values by default)
        shifts: (site_shifts, bond_shifts) from sample_disorder, or None for the clean ring

    Returns:
        ExcitonMatrix; bond (i, i+1) is intra-dimer for even i.
    """
    params = params or CouplingParams()
    n = geom.n_sites
    if shifts is None:
        site_shifts = np.zeros(n)
        bond_shifts = np.zeros(n)
    else:
        site_shifts, bond_shifts = (np.asarray(s, dtype=float) for s in shifts)
        if site_shifts.shape != (n,) or bond_shifts.shape != (n,):
            raise ModelError(f"disorder shifts must have length {n}")

    k = dipole_coupling(geom, params.dipole_constant)

    idx = np.arange(n)
    nxt = (idx + 1) % n
    bonds = np.where(idx % 2 == 0, params.j1_intra, params.j2_inter) + bond_shifts
    k[idx, nxt] = bonds
    k[nxt, idx] = bonds
    k[idx, idx] = params.site_energy_baseline + site_shifts

    return ExcitonMatrix(k, baseline=params.site_energy_baseline)
