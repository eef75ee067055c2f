"""
Transport measures: mean squared displacement, sink probability and
steady-state averages of the coherence measures.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from polaring.model.geometry import RingGeometry

logger = logging.getLogger(__name__)

MSD_FIT_WINDOW = (1.6, 16.0)
STEADY_STATE_WINDOW = (150.0, 300.0)
MEAN_COUPLING_CM1 = 542.0
CHORD = "chord"
ARC = "arc"


@dataclass(frozen=True)
class MsdFit:
    """MSD ~ D t^gamma on the fit window; D in nm^2 / fs^gamma."""
    diffusion_coefficient: float
    exponent: float
    window: Tuple[float, float]
    n_points: int


@dataclass(frozen=True)
class SteadyStateSummary:
    assc: float
    ass_ipr: float
    window: Tuple[float, float]
    sigma_over_J: float


def site_distances(geometry: RingGeometry, initial_site: int, metric: str = CHORD) -> np.ndarray:
    """Distance (nm) of every site from ``initial_site``."""
    if metric == CHORD:
        return geometry.chord_distances_nm(initial_site)
    if metric == ARC:
        return geometry.arc_distances_nm(initial_site)
    raise ValueError(f"unknown distance metric {metric!r}; use {CHORD!r} or {ARC!r}")


def msd_curve(populations: np.ndarray, distances_nm: np.ndarray) -> np.ndarray:
    """MSD(t) = sum_n d_n^2 p_n(t) for populations shaped (N, T)."""
    return np.asarray(distances_nm) ** 2 @ np.asarray(populations)


def fit_power_law(times: np.ndarray, values: np.ndarray, window: Tuple[float, float] = MSD_FIT_WINDOW) -> MsdFit:
    """
    Least-squares line through log MSD against log t on the open window.

    Raises:
        ValueError: if the window is not covered by the time grid or holds
            fewer than two positive samples
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    if times.size == 0 or times[0] > lo or times[-1] < hi:
        raise ValueError(f"fit window {window} fs lies outside the time grid")
    mask = (times > lo) & (times < hi) & (values > 0.0)
    if np.count_nonzero(mask) < 2:
        raise ValueError(f"fewer than two positive MSD samples inside {window} fs")
    slope, intercept = np.polyfit(np.log(times[mask]), np.log(values[mask]), 1)
    return MsdFit(float(np.exp(intercept)), float(slope), (float(lo), float(hi)), int(np.count_nonzero(mask)))


def msd(
    series,
    geometry: RingGeometry,
    initial_site: int,
    metric: str = CHORD,
    window: Tuple[float, float] = MSD_FIT_WINDOW,
) -> Tuple[np.ndarray, MsdFit]:
    """
    Mean squared displacement (nm^2) and its power-law fit.

    Args:
        series: ObservableSeries with site populations on the full time grid
        geometry: Ring supplying the site positions
        initial_site: Site the excitation started on
        metric: "chord" (default) or "arc"
        window: Open fit interval in fs
    """
    curve = msd_curve(series.populations, site_distances(geometry, initial_site, metric))
    return curve, fit_power_law(series.times, curve, window)


def sink_probability(series) -> np.ndarray:
    """P_sink(t) = 1 - sum_n |alpha_n|^2; zeros for a closed run."""
    if not series.sink_open:
        logger.warning("sink probability requested for a closed trajectory; returning zeros")
        return np.zeros_like(series.times)
    return series.values["p_sink"]


def steady_state_summary(
    series,
    window: Tuple[float, float] = STEADY_STATE_WINDOW,
    sigma: float = 0.0,
    mean_coupling: float = MEAN_COUPLING_CM1,
    ipr_key: str = "ipr_rho",
) -> SteadyStateSummary:
    """
    Time averages of L_c and IPR(rho) over ``window``.

    Args:
        series: ObservableSeries (typically an ensemble average)
        window: Averaging interval in fs, inclusive
        sigma: Disorder strength in cm⁻¹, reported as sigma / J
        mean_coupling: J in cm⁻¹
        ipr_key: Which IPR variant to average

    Raises:
        ValueError: if the window reaches past the trajectory
    """
    lo, hi = window
    times = np.asarray(series.times)
    tol = 1e-9 * max(1.0, abs(hi))
    if lo > hi or times[0] > lo + tol or times[-1] < hi - tol:
        raise ValueError(f"steady-state window {window} fs exceeds the trajectory [{times[0]}, {times[-1]}] fs")
    mask = (times >= lo - tol) & (times <= hi + tol)
    return SteadyStateSummary(
        assc=float(np.mean(series.values["L_c"][mask])),
        ass_ipr=float(np.mean(series.values[ipr_key][mask])),
        window=(float(lo), float(hi)),
        sigma_over_J=float(sigma / mean_coupling),
    )
