"""
Static Gaussian disorder.

Site energies and nearest-neighbour couplings each get independent
N(0, sigma^2) shifts, one per site and one per bond. Draws come from a
counter-based Philox generator keyed by (seed, realization, stream) so any
realization can be regenerated alone, in any order, on any worker.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

# Stream ids keep site and bond draws independent of each other.
SITE_STREAM = 0
BOND_STREAM = 1

SEED_MAX = 2**64 - 1


class DisorderKind(Enum):
    """Which couplings carry disorder."""
    DIAGONAL = "diagonal"
    OFF_DIAGONAL = "off_diagonal"
    BOTH = "both"


@dataclass(frozen=True)
class DisorderSpec:
    """Disorder strengths (cm⁻¹) and the key of one realization."""
    sigma_e: float = 0.0
    sigma_j: float = 0.0
    seed: int = 0
    realization_index: int = 0

    def __post_init__(self):
        if not (self.sigma_e >= 0.0) or not (self.sigma_j >= 0.0):
            raise ValueError(
                f"disorder standard deviations must be non-negative, got "
                f"sigma_e={self.sigma_e}, sigma_j={self.sigma_j}"
            )
        if not 0 <= int(self.seed) <= SEED_MAX:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if int(self.realization_index) < 0:
            raise ValueError(f"realization_index must be >= 0, got {self.realization_index}")

    @classmethod
    def of_kind(cls, kind: DisorderKind, sigma: float, seed: int = 0, realization_index: int = 0) -> "DisorderSpec":
        """Disorder of strength ``sigma`` on the couplings selected by ``kind``."""
        kind = DisorderKind(kind)
        sigma_e = sigma if kind in (DisorderKind.DIAGONAL, DisorderKind.BOTH) else 0.0
        sigma_j = sigma if kind in (DisorderKind.OFF_DIAGONAL, DisorderKind.BOTH) else 0.0
        return cls(sigma_e=sigma_e, sigma_j=sigma_j, seed=seed, realization_index=realization_index)

    def for_realization(self, index: int) -> "DisorderSpec":
        return DisorderSpec(self.sigma_e, self.sigma_j, self.seed, index)


def generator(seed: int, realization_index: int, stream: int) -> np.random.Generator:
    """Philox generator for one (seed, realization, stream) key."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(realization_index), int(stream)))
    return np.random.Generator(np.random.Philox(sequence))


def _gaussian(sigma: float, n: int, seed: int, index: int, stream: int) -> np.ndarray:
    if sigma == 0.0:
        return np.zeros(n)
    return generator(seed, index, stream).normal(0.0, sigma, size=n)


def sample_disorder(spec: DisorderSpec, n_sites: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw one disorder realization.

    Returns:
        (site_shifts, bond_shifts), both of length n_sites in cm⁻¹. Bond i
        joins sites i and i+1 (mod n_sites).
    """
    site_shifts = _gaussian(spec.sigma_e, n_sites, spec.seed, spec.realization_index, SITE_STREAM)
    bond_shifts = _gaussian(spec.sigma_j, n_sites, spec.seed, spec.realization_index, BOND_STREAM)
    return site_shifts, bond_shifts
