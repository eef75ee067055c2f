"""
Variational dynamics of the Davydov D1 state.
"""

from .accuracy import deviation_amplitude, relative_deviation
from .eom import EquationsOfMotion, debye_waller, debye_waller_matrix, eom_rhs
from .initial import bright_state, initial_state
from .integrate import EnsembleTrajectory, propagate, propagate_ensemble, rk4_step
from .state import D1State, IntegratorConfig, SinkSpec, TrajectorySnapshot

__all__ = [
    "D1State",
    "SinkSpec",
    "IntegratorConfig",
    "TrajectorySnapshot",
    "EquationsOfMotion",
    "debye_waller",
    "debye_waller_matrix",
    "eom_rhs",
    "rk4_step",
    "propagate",
    "propagate_ensemble",
    "EnsembleTrajectory",
    "bright_state",
    "initial_state",
    "deviation_amplitude",
    "relative_deviation",
]
