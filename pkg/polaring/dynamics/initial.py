"""
Initial-state presets: a single excited site or the bright eigenstate of
the clean ring.
"""

from typing import Optional

import numpy as np

from polaring.dynamics.state import DEFAULT_INITIAL_SITE, D1State
from polaring.model.exciton import ExcitonMatrix
from polaring.model.geometry import RingGeometry
from polaring.statics.spectrum import diagonalize

SITE = "site"
BRIGHT = "bright"
INITIAL_KINDS = (SITE, BRIGHT)


def eigenstate_brightness(geometry: RingGeometry, eigenvectors: np.ndarray) -> np.ndarray:
    """L_s of every eigenvector column: |sum_n v_n d_n|^2."""
    transition = geometry.dipoles.T @ eigenvectors
    return np.sum(np.abs(transition) ** 2, axis=0)


def bright_state(geometry: RingGeometry, clean_model: ExcitonMatrix, n_modes: Optional[int] = None) -> D1State:
    """Bath vacuum times the clean-ring eigenstate with maximal L_s (lowest of a degenerate pair)."""
    spectrum = diagonalize(clean_model)
    brightness = eigenstate_brightness(geometry, spectrum.eigenvectors)
    level = int(np.argmax(np.round(brightness, 9)))
    return D1State.from_amplitudes(spectrum.eigenvectors[:, level], n_modes)


def initial_state(
    kind: str,
    geometry: RingGeometry,
    clean_model: ExcitonMatrix,
    site: int = DEFAULT_INITIAL_SITE,
    n_modes: Optional[int] = None,
) -> D1State:
    if kind == SITE:
        return D1State.localized(geometry.n_sites, site, n_modes)
    if kind == BRIGHT:
        return bright_state(geometry, clean_model, n_modes)
    raise ValueError(f"unknown initial state kind {kind!r}; use one of {INITIAL_KINDS}")
