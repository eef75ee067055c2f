"""
Physical observables derived from D1 trajectories.
"""

from .density import (
    ReducedDensityMatrix,
    coherence_size,
    inverse_population_ratio,
    momentum_populations,
    reduced_density,
    superradiance_factor,
)
from .phonons import EnergyComponents, energy_components, phonon_displacement
from .series import ObservableSeries, average_series, observe_arrays, observe_ensemble, observe_trajectory
from .transport import MsdFit, SteadyStateSummary, fit_power_law, msd, sink_probability, steady_state_summary

__all__ = [
    "ReducedDensityMatrix",
    "reduced_density",
    "coherence_size",
    "inverse_population_ratio",
    "superradiance_factor",
    "momentum_populations",
    "EnergyComponents",
    "energy_components",
    "phonon_displacement",
    "ObservableSeries",
    "observe_arrays",
    "observe_trajectory",
    "observe_ensemble",
    "average_series",
    "MsdFit",
    "SteadyStateSummary",
    "fit_power_law",
    "msd",
    "sink_probability",
    "steady_state_summary",
]
