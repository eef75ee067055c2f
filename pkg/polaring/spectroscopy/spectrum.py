"""
2D photon-echo spectra and the linear absorption read off their diagonal.

Fourier conventions put a transition at energy E at (w_tau, w_t) = (E, E)
for both pathway classes:

    rephasing      sum_{tau,t} (R2 + R3) e^(-i w_tau tau) e^(+i w_t t)
    non-rephasing  sum_{tau,t} (R1 + R4) e^(+i w_tau tau) e^(+i w_t t)

Frequencies are reported in units of omega0, measured from the monomer
transition.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from polaring.model.bath import DEFAULT_OMEGA0, PhononBath
from polaring.model.exciton import ExcitonMatrix
from polaring.model.geometry import RingGeometry
from polaring.spectroscopy.lineshape import BathLineshapeParams
from polaring.spectroscopy.response import (
    DEFAULT_STEP,
    DEFAULT_T_MAX,
    ResponseGrid,
    build_amplitude_table,
    default_grid,
    response_functions,
    table_config,
)
from polaring.units import CM1_TO_RAD_PER_FS

logger = logging.getLogger(__name__)

DEFAULT_PADDING = 4
DEFAULT_OMEGA_MAX = 2.5
REPHASING = "rephasing"
NONREPHASING = "nonrephasing"
TOTAL = "total"
KINDS = (REPHASING, NONREPHASING, TOTAL)


@dataclass(frozen=True)
class Spectrum2D:
    """Real intensity on (omega_tau, omega_t), both in omega0 units."""
    omega_tau: np.ndarray
    omega_t: np.ndarray
    intensity: np.ndarray
    kind: str = TOTAL
    t_w: float = 0.0
    n_members: int = 1


def realization_responses(
    model: Union[ExcitonMatrix, np.ndarray],
    bath: PhononBath,
    geometry: Union[RingGeometry, np.ndarray],
    p: BathLineshapeParams,
    t_ws: Sequence[float] = (0.0,),
    t_max: float = DEFAULT_T_MAX,
    step: float = DEFAULT_STEP,
    dt: float = 0.05,
) -> List[ResponseGrid]:
    """Response grids of one disorder realization, one per waiting time, from a single table."""
    cfg = table_config(2.0 * t_max + max(t_ws), step, dt)
    cfg.check_stability(bath)
    table = build_amplitude_table(model, bath, cfg)
    grid = default_grid(t_max, step)
    return [response_functions(table, geometry, p, t_w, grid, grid) for t_w in t_ws]


def _trapezoid_weights(signal: np.ndarray) -> np.ndarray:
    weighted = np.array(signal, dtype=complex)
    weighted[0, :] *= 0.5
    weighted[:, 0] *= 0.5
    return weighted


def _transform(signal: np.ndarray, step: float, pad: int, tau_sign: int) -> np.ndarray:
    n_tau, n_t = signal.shape
    shape = (pad * n_tau, pad * n_t)
    weighted = _trapezoid_weights(signal)
    if tau_sign < 0:
        along_tau = np.fft.fft(weighted, n=shape[0], axis=0)
    else:
        along_tau = np.fft.ifft(weighted, n=shape[0], axis=0) * shape[0]
    both = np.fft.ifft(along_tau, n=shape[1], axis=1) * shape[1]
    return np.fft.fftshift(both) * step * step


def _frequencies(n: int, step: float, pad: int, omega0: float) -> np.ndarray:
    return np.fft.fftshift(2.0 * np.pi * np.fft.fftfreq(pad * n, d=step)) / (omega0 * CM1_TO_RAD_PER_FS)


def spectrum_2d(
    grid: ResponseGrid,
    kind: str = TOTAL,
    omega0: float = DEFAULT_OMEGA0,
    pad: int = DEFAULT_PADDING,
    omega_max: Optional[float] = DEFAULT_OMEGA_MAX,
) -> Spectrum2D:
    """
    Fourier transform a response grid.

    Args:
        grid: Response functions on uniform (tau, t) grids
        kind: "rephasing", "nonrephasing" or "total" (sum of both real parts)
        omega0: Frequency unit in cm⁻¹
        pad: Zero-padding factor on both axes
        omega_max: Crop to |omega| <= omega_max (omega0 units); None keeps all
    """
    if kind not in KINDS:
        raise ValueError(f"unknown spectrum kind {kind!r}; use one of {KINDS}")
    if pad < 1:
        raise ValueError("padding factor must be >= 1")
    step = float(grid.tau_grid[1] - grid.tau_grid[0])
    if not np.isclose(grid.t_grid[1] - grid.t_grid[0], step):
        raise ValueError("tau and t grids must share one step")

    reph = _transform(grid.rephasing, step, pad, -1)
    nonreph = _transform(grid.nonrephasing, step, pad, +1)
    if kind == REPHASING:
        intensity = reph.real
    elif kind == NONREPHASING:
        intensity = nonreph.real
    else:
        intensity = reph.real + nonreph.real

    w_tau = _frequencies(grid.tau_grid.size, step, pad, omega0)
    w_t = _frequencies(grid.t_grid.size, step, pad, omega0)
    if omega_max is not None:
        keep_tau = np.abs(w_tau) <= omega_max
        keep_t = np.abs(w_t) <= omega_max
        w_tau, w_t = w_tau[keep_tau], w_t[keep_t]
        intensity = intensity[np.ix_(keep_tau, keep_t)]
    return Spectrum2D(w_tau, w_t, intensity, kind, grid.t_w, grid.n_members)


def average_spectra(spectra: Sequence[Spectrum2D]) -> Spectrum2D:
    """Member-weighted mean intensity, accumulated in the given order."""
    if not spectra:
        raise ValueError("cannot average an empty list of spectra")
    first = spectra[0]
    total = sum(s.n_members for s in spectra)
    acc = np.zeros_like(first.intensity)
    for s in spectra:
        if s.intensity.shape != first.intensity.shape:
            raise ValueError("spectra do not share a frequency grid")
        acc += (s.n_members / total) * s.intensity
    return Spectrum2D(first.omega_tau, first.omega_t, acc, first.kind, first.t_w, total)


def linear_absorption(spectrum: Spectrum2D) -> np.ndarray:
    """
    Diagonal (omega_tau = omega_t) of a T_w = 0 spectrum on the omega_t grid,
    normalized to unit maximum.

    Raises:
        ValueError: for a non-zero waiting time
    """
    if spectrum.t_w != 0.0:
        raise ValueError(f"linear absorption needs T_w = 0, got {spectrum.t_w} fs")
    interp = RegularGridInterpolator(
        (spectrum.omega_tau, spectrum.omega_t), spectrum.intensity, bounds_error=False, fill_value=0.0
    )
    diagonal = interp(np.column_stack([spectrum.omega_t, spectrum.omega_t]))
    peak = np.max(diagonal)
    if peak <= 0.0:
        peak = np.max(np.abs(diagonal))
    if peak == 0.0:
        return diagonal
    return diagonal / peak


def fwhm(x: np.ndarray, y: np.ndarray) -> float:
    """
    Full width at half maximum of the highest peak, with linear
    interpolation at both half-maximum crossings.

    Raises:
        ValueError: if the curve does not fall below half maximum on both sides
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    top = int(np.argmax(y))
    half = 0.5 * y[top]
    if not half > 0.0:
        raise ValueError("FWHM needs a positive peak")

    left = top
    while left > 0 and y[left] >= half:
        left -= 1
    right = top
    while right < y.size - 1 and y[right] >= half:
        right += 1
    if y[left] >= half or y[right] >= half:
        raise ValueError("peak does not drop to half maximum inside the grid")

    x_left = np.interp(half, [y[left], y[left + 1]], [x[left], x[left + 1]])
    x_right = np.interp(half, [y[right], y[right - 1]], [x[right], x[right - 1]])
    return float(x_right - x_left)


def peak_position(spectrum: Spectrum2D) -> Tuple[float, float]:
    i, j = np.unravel_index(int(np.argmax(spectrum.intensity)), spectrum.intensity.shape)
    return float(spectrum.omega_tau[i]), float(spectrum.omega_t[j])


def diagonal_antidiagonal_widths(spectrum: Spectrum2D) -> Tuple[float, float]:
    """
    FWHM of the main peak along the diagonal and the anti-diagonal through
    it, both measured as distances in the (omega_tau, omega_t) plane.
    """
    data = spectrum.intensity
    i, j = np.unravel_index(int(np.argmax(data)), data.shape)
    d_omega = float(spectrum.omega_t[1] - spectrum.omega_t[0])
    n_tau, n_t = data.shape

    ks = np.arange(-max(n_tau, n_t), max(n_tau, n_t) + 1)
    diag_ok = (i + ks >= 0) & (i + ks < n_tau) & (j + ks >= 0) & (j + ks < n_t)
    anti_ok = (i + ks >= 0) & (i + ks < n_tau) & (j - ks >= 0) & (j - ks < n_t)
    kd, ka = ks[diag_ok], ks[anti_ok]
    diagonal = data[i + kd, j + kd]
    anti = data[i + ka, j - ka]
    scale = np.sqrt(2.0) * d_omega
    return fwhm(kd * scale, diagonal), fwhm(ka * scale, anti)
