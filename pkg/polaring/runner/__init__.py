"""
Configuration, deterministic ensemble scheduling, outputs and figure grids.
"""

from .config import RunConfig, load_config, resolve_threads
from .ensemble import EnsembleOutcome, EnsembleScheduler, run_ensemble
from .experiments import EXPERIMENT_TYPES, Experiment, ExperimentResult, make_experiment, run_direct
from .figures import FIGURES, FigureBundle, figure_names, reproduce_figure
from .output import OutputWriter, RunManifest

__all__ = [
    "RunConfig",
    "load_config",
    "resolve_threads",
    "EnsembleOutcome",
    "EnsembleScheduler",
    "run_ensemble",
    "EXPERIMENT_TYPES",
    "Experiment",
    "ExperimentResult",
    "make_experiment",
    "run_direct",
    "FIGURES",
    "FigureBundle",
    "figure_names",
    "reproduce_figure",
    "OutputWriter",
    "RunManifest",
]
