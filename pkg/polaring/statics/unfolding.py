"""
Ensemble unfolding of level spacings and the energy-resolved Brody map.

Spacing i of every realization is divided by the ensemble mean of spacing
i, so the pooled sample has unit mean without fitting a smooth level
density. Zero spacings from exact degeneracies are kept.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from polaring.statics.brody import MIN_SAMPLES, BrodyFit, fit_brody
from polaring.statics.spectrum import SpectralRealization

logger = logging.getLogger(__name__)

MIN_REALIZATIONS = 100
DEFAULT_WINDOWS = 8


@dataclass(frozen=True)
class SpacingEnsemble:
    """Pooled unfolded spacings, in realization-major order."""
    unfolded_spacings: np.ndarray
    per_level_mean_spacing: np.ndarray
    level_index_range: Tuple[int, int]
    midpoint_energies: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.unfolded_spacings.size


def _energy_matrix(realizations: Sequence[Union[SpectralRealization, np.ndarray]]) -> np.ndarray:
    rows = [np.asarray(getattr(r, "energies", r), dtype=float) for r in realizations]
    if not rows:
        raise ValueError("no realizations to unfold")
    sizes = {row.size for row in rows}
    if len(sizes) != 1:
        raise ValueError(f"realizations have different dimensions: {sorted(sizes)}")
    return np.sort(np.stack(rows), axis=1)


def unfold_ensemble(
    realizations: Sequence[Union[SpectralRealization, np.ndarray]],
    level_index_range: Optional[Tuple[int, int]] = None,
) -> SpacingEnsemble:
    """
    Unfold the spectra of an ensemble.

    Args:
        realizations: SpectralRealization objects or plain energy arrays
        level_index_range: (first, last) spacing indices to keep, inclusive;
            all spacings by default

    Raises:
        ValueError: if the spectra have fewer than 2 levels
    """
    energies = _energy_matrix(realizations)
    n_real, n_levels = energies.shape
    if n_levels < 2:
        raise ValueError("need at least 2 levels to form spacings")
    if n_real < MIN_REALIZATIONS:
        logger.warning("unfolding only %d realizations; local mean spacings will be noisy", n_real)

    lo, hi = level_index_range if level_index_range is not None else (0, n_levels - 2)
    if not 0 <= lo <= hi <= n_levels - 2:
        raise ValueError(f"level_index_range {level_index_range} outside [0, {n_levels - 2}]")

    raw = np.diff(energies, axis=1)[:, lo : hi + 1]
    midpoints = 0.5 * (energies[:, lo : hi + 1] + energies[:, lo + 1 : hi + 2])
    mean = raw.mean(axis=0)

    # exactly degenerate indices keep their zeros instead of dividing 0 by 0
    positive = mean[mean > 0.0]
    floor = 1e-9 * positive.mean() if positive.size else 1.0
    unfolded = raw / np.maximum(mean, floor)

    return SpacingEnsemble(
        unfolded_spacings=unfolded.ravel(),
        per_level_mean_spacing=mean,
        level_index_range=(lo, hi),
        midpoint_energies=midpoints.ravel(),
    )


@dataclass(frozen=True)
class BetaWindow:
    """Brody fit of the spacings whose midpoints fall in one energy window."""
    sigma: float
    window_lo: float
    window_hi: float
    n_spacings: int
    fit: Optional[BrodyFit]

    @property
    def flagged(self) -> bool:
        return self.fit is None

    @property
    def beta(self) -> Optional[float]:
        return None if self.fit is None else self.fit.beta

    @property
    def classification(self) -> str:
        return "insufficient" if self.fit is None else self.fit.classification


def window_edges(midpoints: np.ndarray, energy_windows: Union[int, Sequence[float]]) -> np.ndarray:
    """Equal-population quantile edges, or the given explicit edges."""
    if isinstance(energy_windows, (int, np.integer)):
        if energy_windows < 1:
            raise ValueError("need at least one energy window")
        return np.quantile(midpoints, np.linspace(0.0, 1.0, int(energy_windows) + 1))
    edges = np.asarray(energy_windows, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) < 0):
        raise ValueError("explicit window edges must be an ascending 1D array")
    return edges


def beta_energy_map(
    realizations: Union[SpacingEnsemble, Sequence[SpectralRealization]],
    energy_windows: Union[int, Sequence[float]] = DEFAULT_WINDOWS,
    sigma: float = 0.0,
    min_spacings: int = MIN_SAMPLES,
) -> List[BetaWindow]:
    """
    Brody parameter per energy window.

    Windows with fewer than ``min_spacings`` spacings are flagged and left
    unfitted.
    """
    ensemble = realizations if isinstance(realizations, SpacingEnsemble) else unfold_ensemble(realizations)
    mids = ensemble.midpoint_energies
    edges = window_edges(mids, energy_windows)
    n_windows = edges.size - 1
    which = np.clip(np.searchsorted(edges, mids, side="right") - 1, 0, n_windows - 1)

    out: List[BetaWindow] = []
    for w in range(n_windows):
        inside = (which == w) & (mids >= edges[0]) & (mids <= edges[-1])
        sample = ensemble.unfolded_spacings[inside]
        fit = fit_brody(sample, min_samples=None) if sample.size >= min_spacings else None
        if fit is None:
            logger.warning(
                "energy window [%.1f, %.1f] cm-1 has %d spacings (< %d); not fitted",
                edges[w], edges[w + 1], sample.size, min_spacings,
            )
        out.append(BetaWindow(float(sigma), float(edges[w]), float(edges[w + 1]), int(sample.size), fit))
    return out
