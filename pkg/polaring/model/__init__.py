"""
Ring model: geometry, disorder, exciton matrix and phonon bath.

All objects are immutable after construction and safe to share between
concurrent trajectory workers.
"""

from .bath import PhononBath, build_phonon_bath, momentum_grid
from .disorder import DisorderKind, DisorderSpec, sample_disorder
from .exciton import CouplingParams, ExcitonMatrix, build_exciton_matrix, dipole_coupling
from .geometry import RingGeometry, build_geometry

__all__ = [
    "RingGeometry",
    "build_geometry",
    "DisorderKind",
    "DisorderSpec",
    "sample_disorder",
    "CouplingParams",
    "ExcitonMatrix",
    "build_exciton_matrix",
    "dipole_coupling",
    "PhononBath",
    "build_phonon_bath",
    "momentum_grid",
]
