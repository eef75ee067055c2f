"""
Diagonalization of exciton matrices and eigenstate localization.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from polaring.model.bath import momentum_grid
from polaring.model.exciton import ExcitonMatrix


@dataclass(frozen=True)
class SpectralRealization:
    """Ascending energies (cm⁻¹) and orthonormal eigenvectors stored as columns."""
    energies: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n_levels(self) -> int:
        return self.energies.shape[0]


def _as_matrix(k: Union[ExcitonMatrix, np.ndarray]) -> np.ndarray:
    mat = k.k if isinstance(k, ExcitonMatrix) else np.asarray(k, dtype=float)
    if mat.ndim < 2 or mat.shape[-1] != mat.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {mat.shape}")
    if not np.array_equal(mat, np.swapaxes(mat, -1, -2)):
        raise ValueError("matrix is not symmetric")
    return mat


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each column made positive
    idx = np.argmax(np.abs(vectors), axis=-2)
    pivot = np.take_along_axis(vectors, idx[..., None, :], axis=-2)
    return vectors * np.where(pivot < 0, -1.0, 1.0)


def diagonalize(k: Union[ExcitonMatrix, np.ndarray]) -> SpectralRealization:
    """
    Full spectrum of a symmetric matrix.

    Raises:
        ValueError: if the matrix is not exactly symmetric
    """
    mat = _as_matrix(k)
    energies, vectors = np.linalg.eigh(mat)
    return SpectralRealization(energies, _fix_signs(vectors))


def diagonalize_many(ks: Sequence[Union[ExcitonMatrix, np.ndarray]]) -> List[SpectralRealization]:
    """Diagonalize a stack of equally sized matrices in one LAPACK call."""
    stack = np.stack([_as_matrix(k) for k in ks])
    energies, vectors = np.linalg.eigh(stack)
    vectors = _fix_signs(vectors)
    return [SpectralRealization(e, v) for e, v in zip(energies, vectors)]


def ipr_spectrum(r: SpectralRealization) -> np.ndarray:
    """Rows of (E_i, IPR_i) with IPR_i = 1 / sum_n |psi_n^i|^4."""
    weights = np.sum(np.abs(r.eigenvectors) ** 4, axis=0)
    return np.column_stack([r.energies, 1.0 / weights])


def ipr_vs_energy(
    realizations: Sequence[SpectralRealization],
    bins: Union[int, np.ndarray] = 60,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Ensemble IPR binned on energy.

    Returns:
        (bin_centres_cm1, mean_ipr, counts) for the populated bins only.
    """
    rows = np.concatenate([ipr_spectrum(r) for r in realizations])
    counts, edges = np.histogram(rows[:, 0], bins=bins)
    sums, _ = np.histogram(rows[:, 0], bins=edges, weights=rows[:, 1])
    keep = counts > 0
    centres = 0.5 * (edges[:-1] + edges[1:])
    return centres[keep], sums[keep] / counts[keep], counts[keep]


def momentum_labels(r: SpectralRealization) -> np.ndarray:
    """Dominant momentum on the bath grid for every eigenstate."""
    n = r.n_levels
    k = momentum_grid(n)
    phases = np.exp(-1j * np.outer(k, np.arange(n)))
    n_k = np.abs(phases @ r.eigenvectors) ** 2 / n
    return k[np.argmax(n_k, axis=0)]


def degenerate_groups(energies: np.ndarray, tol: float = 1e-6) -> List[List[int]]:
    """Group sorted level indices whose neighbouring gaps are below ``tol``."""
    groups: List[List[int]] = [[0]]
    for i in range(1, len(energies)):
        if energies[i] - energies[i - 1] < tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups
