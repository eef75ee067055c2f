"""
Linear and 2D electronic spectroscopy from propagated D1 amplitudes.
"""

from .lineshape import BathLineshapeParams, lineshape_factors, lineshape_g
from .response import (
    AmplitudeTable,
    ResponseGrid,
    average_responses,
    build_amplitude_table,
    orientation_factor,
    orientation_tensor,
    response_functions,
)
from .spectrum import (
    Spectrum2D,
    average_spectra,
    diagonal_antidiagonal_widths,
    fwhm,
    linear_absorption,
    peak_position,
    realization_responses,
    spectrum_2d,
)

__all__ = [
    "BathLineshapeParams",
    "lineshape_g",
    "lineshape_factors",
    "AmplitudeTable",
    "ResponseGrid",
    "build_amplitude_table",
    "orientation_factor",
    "orientation_tensor",
    "response_functions",
    "average_responses",
    "Spectrum2D",
    "spectrum_2d",
    "average_spectra",
    "linear_absorption",
    "fwhm",
    "peak_position",
    "diagonal_antidiagonal_widths",
    "realization_responses",
]
