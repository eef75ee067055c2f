"""
Statics: eigenstate localization and level-spacing statistics.
"""

from .brody import BrodyFit, brody_normalization, brody_pdf, classify_beta, fit_brody, sample_brody
from .spectrum import (
    SpectralRealization,
    degenerate_groups,
    diagonalize,
    diagonalize_many,
    ipr_spectrum,
    ipr_vs_energy,
    momentum_labels,
)
from .unfolding import BetaWindow, SpacingEnsemble, beta_energy_map, unfold_ensemble

__all__ = [
    "SpectralRealization",
    "diagonalize",
    "diagonalize_many",
    "ipr_spectrum",
    "ipr_vs_energy",
    "momentum_labels",
    "degenerate_groups",
    "SpacingEnsemble",
    "unfold_ensemble",
    "BetaWindow",
    "beta_energy_map",
    "BrodyFit",
    "fit_brody",
    "brody_normalization",
    "brody_pdf",
    "sample_brody",
    "classify_beta",
]
