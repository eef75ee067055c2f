"""
Experiments the runner can execute.

Each experiment turns a validated RunConfig into a batch task for the
ensemble scheduler, reduces the batch payloads in order, and writes its
CSV tables.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from polaring.dynamics.accuracy import relative_deviation
from polaring.dynamics.initial import eigenstate_brightness, initial_state
from polaring.dynamics.integrate import propagate_ensemble
from polaring.errors import ConfigError, TrajectoryAborted
from polaring.model.bath import momentum_grid
from polaring.model.exciton import ExcitonMatrix, build_exciton_matrix
from polaring.model.disorder import sample_disorder
from polaring.model.geometry import RingGeometry
from polaring.observables.series import ObservableSeries, average_series, observe_ensemble
from polaring.observables.transport import fit_power_law, steady_state_summary
from polaring.runner.config import RunConfig
from polaring.runner.ensemble import EnsembleOutcome, EnsembleScheduler
from polaring.runner.output import OutputWriter, load_pyplot
from polaring.spectroscopy.response import average_responses
from polaring.spectroscopy.spectrum import (
    TOTAL,
    diagonal_antidiagonal_widths,
    fwhm,
    linear_absorption,
    peak_position,
    realization_responses,
    spectrum_2d,
)
from polaring.statics.spectrum import diagonalize, diagonalize_many, ipr_spectrum, ipr_vs_energy, momentum_labels
from polaring.statics.unfolding import beta_energy_map

logger = logging.getLogger(__name__)

# observable -> (trajectory_<stem>.csv, unit-annotated value column)
TRAJECTORY_FILES = {
    "L_c": ("L_c", "L_c_sites"),
    "ipr_rho": ("ipr", "ipr_sites"),
    "ipr_rho_printed": ("ipr_printed", "ipr_printed_sites"),
    "L_s": ("L_s", "L_s"),
    "msd_nm2": ("msd", "msd_nm2"),
    "p_sink": ("p_sink", "p_sink"),
    "e_ex": ("e_ex", "e_ex_omega0"),
    "e_bath": ("e_bath", "e_bath_omega0"),
    "e_int": ("e_int", "e_int_omega0"),
    "e_total": ("e_total", "e_total_omega0"),
    "delta_dev": ("deviation", "delta_dev_omega0"),
    "norm": ("norm", "norm"),
}


def trajectory_file(key: str) -> str:
    return f"trajectory_{TRAJECTORY_FILES[key][0]}.csv"


@dataclass
class ExperimentResult:
    experiment: str
    outcome: Optional[EnsembleOutcome]
    deviations: List[Optional[float]] = field(default_factory=list)
    data: Dict[str, Any] = field(default_factory=dict)


def realization_models(config: RunConfig, geometry: RingGeometry, indices: Sequence[int]) -> List[ExcitonMatrix]:
    """Exciton matrices of the given realizations; each draws only from its own streams."""
    params = config.coupling_params()
    n = geometry.n_sites
    return [
        build_exciton_matrix(geometry, params, sample_disorder(config.disorder_spec(i), n))
        for i in indices
    ]


class Experiment(ABC):
    """Abstract base class for runner experiments."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Experiment name as used in [run] experiment."""
        pass

    @abstractmethod
    def run(self, config: RunConfig, scheduler: EnsembleScheduler) -> ExperimentResult:
        """Compute the ensemble result."""
        pass

    @abstractmethod
    def write(self, result: ExperimentResult, writer: OutputWriter, plots: bool = False) -> None:
        """Write CSV tables (and plots if asked) for a finished result."""
        pass


class StaticsExperiment(Experiment):
    """Eigenstate IPR against energy and the Brody parameter map."""

    @property
    def name(self) -> str:
        return "statics"

    def run(self, config: RunConfig, scheduler: EnsembleScheduler) -> ExperimentResult:
        geometry = config.build_geometry()

        def task(indices: range):
            return diagonalize_many(realization_models(config, geometry, indices)), {}

        outcome = scheduler.run(task, config.run.ensemble_size)
        realizations = [r for batch in outcome.payloads for r in batch]
        a = config.analysis
        energy, ipr, counts = ipr_vs_energy(realizations, bins=a.ipr_bins)
        windows = beta_energy_map(realizations, a.energy_windows, config.disorder.sigma, a.min_spacings)

        clean = diagonalize(build_exciton_matrix(geometry, config.coupling_params()))
        data = {
            "sigma_cm1": config.disorder.sigma,
            "ipr_vs_energy": (energy, ipr, counts),
            "brody_map": windows,
            "clean_spectrum": clean,
            "clean_brightness": eigenstate_brightness(geometry, clean.eigenvectors),
        }
        return ExperimentResult(self.name, outcome, [None] * config.run.ensemble_size, data)

    def write(self, result: ExperimentResult, writer: OutputWriter, plots: bool = False) -> None:
        energy, ipr, counts = result.data["ipr_vs_energy"]
        writer.write_columns("ipr_vs_energy.csv", {
            "sigma": np.full(len(energy), result.data["sigma_cm1"]),
            "energy_cm1": energy,
            "ipr": ipr,
            "count": counts,
        })

        windows = result.data["brody_map"]
        writer.write_frame("brody_map.csv", pd.DataFrame({
            "sigma": [w.sigma for w in windows],
            "window_lo": [w.window_lo for w in windows],
            "window_hi": [w.window_hi for w in windows],
            "n_spacings": [w.n_spacings for w in windows],
            "beta": [np.nan if w.beta is None else w.beta for w in windows],
            "class": [w.classification for w in windows],
        }))

        clean = result.data["clean_spectrum"]
        writer.write_columns("clean_spectrum.csv", {
            "level": np.arange(clean.n_levels),
            "energy_cm1": clean.energies,
            "ipr_sites": ipr_spectrum(clean)[:, 1],
            "momentum_rad": momentum_labels(clean),
            "L_s": result.data["clean_brightness"],
        })

        if plots:
            plt = load_pyplot()
            if plt is None:
                return
            fig, ax = plt.subplots()
            ax.plot(energy, ipr, ".")
            ax.set_xlabel("E (cm$^{-1}$)")
            ax.set_ylabel("IPR")
            writer.add_plot("ipr_vs_energy.png", fig)
            plt.close(fig)


class DynamicsExperiment(Experiment):
    """Ensemble-averaged D1 observables of one disorder class."""

    require_sink = False

    @property
    def name(self) -> str:
        return "dynamics"

    def check(self, config: RunConfig) -> None:
        if self.require_sink and config.sink_spec() is None:
            raise ConfigError(f"the {self.name} experiment needs a sink", "sink", "gamma_omega0", "omega0")

    def run(self, config: RunConfig, scheduler: EnsembleScheduler) -> ExperimentResult:
        self.check(config)
        geometry = config.build_geometry()
        bath = config.build_bath()
        sink = config.sink_spec()
        cfg = config.integrator_config()
        clean = build_exciton_matrix(geometry, config.coupling_params())
        start = initial_state(config.initial.kind, geometry, clean, config.initial.site, bath.n_modes)
        metric = config.analysis.msd_metric

        def task(indices: range):
            models = realization_models(config, geometry, indices)
            run = propagate_ensemble(start, models, bath, sink, cfg)
            members = observe_ensemble(run, models, bath, geometry, config.initial.site, sink is not None, metric)
            excluded = {
                i: f"non-finite state at step {int(run.abort_step[j])}"
                for j, i in enumerate(indices)
                if run.aborted[j]
            }
            deviations = {
                i: relative_deviation(run.member(j))
                for j, i in enumerate(indices)
                if not run.aborted[j]
            }
            kept = [s for s in members if s is not None]
            return (average_series(kept) if kept else None, deviations), excluded

        outcome = scheduler.run(task, config.run.ensemble_size)
        if not outcome.payloads:
            raise TrajectoryAborted("every realization was excluded", step=0)
        series = average_series([p[0] for p in outcome.payloads if p[0] is not None])
        by_index: Dict[int, Optional[float]] = {}
        for _, deviations in outcome.payloads:
            by_index.update(deviations)

        data: Dict[str, Any] = {"series": series}
        a = config.analysis
        if series.times[-1] >= a.steady_hi_fs - 1e-6:
            ipr_key = "ipr_rho" if a.ipr_exponent == 2 else "ipr_rho_printed"
            data["steady_state"] = steady_state_summary(
                series, (a.steady_lo_fs, a.steady_hi_fs), config.disorder.sigma, ipr_key=ipr_key
            )
        else:
            logger.info("trajectory ends before %.0f fs; no steady-state summary", a.steady_hi_fs)
        self.extend(config, series, data)

        deviations = [by_index.get(i) for i in range(config.run.ensemble_size)]
        return ExperimentResult(self.name, outcome, deviations, data)

    def extend(self, config: RunConfig, series: ObservableSeries, data: Dict[str, Any]) -> None:
        """Hook for derived analyses of the averaged series."""

    def write(self, result: ExperimentResult, writer: OutputWriter, plots: bool = False) -> None:
        series: ObservableSeries = result.data["series"]
        for key, (_, column) in TRAJECTORY_FILES.items():
            writer.write_columns(trajectory_file(key), {"time_fs": series.times, column: series.values[key]})
        writer.write_grid("n_k.csv", series.times, series.n_k, "k_index", "n_k")
        writer.write_grid("xi_n.csv", series.times, series.xi_n, "site", "xi")
        writer.write_grid("populations.csv", series.times, series.populations, "site", "population")
        writer.write_columns("momentum_grid.csv", {
            "k_index": np.arange(series.n_k.shape[0]),
            "k_rad": momentum_grid(series.n_k.shape[0]),
        })

        steady = result.data.get("steady_state")
        if steady is not None:
            writer.write_columns("steady_state.csv", {
                "window_lo_fs": [steady.window[0]],
                "window_hi_fs": [steady.window[1]],
                "sigma_over_J": [steady.sigma_over_J],
                "assc_sites": [steady.assc],
                "ass_ipr_sites": [steady.ass_ipr],
            })
        self.write_extra(result, writer)

        if plots:
            self.plot(result, writer)

    def write_extra(self, result: ExperimentResult, writer: OutputWriter) -> None:
        pass

    def plot(self, result: ExperimentResult, writer: OutputWriter) -> None:
        plt = load_pyplot()
        if plt is None:
            return
        series: ObservableSeries = result.data["series"]
        fig, ax = plt.subplots()
        ax.plot(series.times, series["L_c"], label="$L_c$")
        ax.plot(series.times, series["ipr_rho"], label="IPR")
        ax.set_xlabel("t (fs)")
        ax.legend()
        writer.add_plot("delocalization.png", fig)
        plt.close(fig)

        fig, ax = plt.subplots()
        mesh = ax.pcolormesh(series.times, np.arange(series.populations.shape[0]), series.populations, shading="auto")
        fig.colorbar(mesh, ax=ax)
        ax.set_xlabel("t (fs)")
        ax.set_ylabel("site")
        writer.add_plot("populations.png", fig)
        plt.close(fig)


class TransferExperiment(DynamicsExperiment):
    """Dynamics with a population sink; adds the transfer summary."""

    require_sink = True

    @property
    def name(self) -> str:
        return "transfer"

    def extend(self, config: RunConfig, series: ObservableSeries, data: Dict[str, Any]) -> None:
        k = momentum_grid(series.n_k.shape[0])
        data["transfer"] = {
            "gamma_omega0": config.sink.gamma_omega0,
            "sink_site": config.sink.site,
            "p_sink_final": float(series["p_sink"][-1]),
            "peak_k_rad_final": float(k[int(np.argmax(series.n_k[:, -1]))]),
        }

    def write_extra(self, result: ExperimentResult, writer: OutputWriter) -> None:
        summary = result.data["transfer"]
        writer.write_frame("transfer_summary.csv", pd.DataFrame([summary]))


class MsdExperiment(DynamicsExperiment):
    """Dynamics plus the power-law fit of the mean squared displacement."""

    @property
    def name(self) -> str:
        return "msd"

    def extend(self, config: RunConfig, series: ObservableSeries, data: Dict[str, Any]) -> None:
        a = config.analysis
        data["msd_fit"] = fit_power_law(series.times, series["msd_nm2"], (a.msd_fit_lo_fs, a.msd_fit_hi_fs))

    def write_extra(self, result: ExperimentResult, writer: OutputWriter) -> None:
        fit = result.data["msd_fit"]
        writer.write_columns("msd_fit.csv", {
            "window_lo_fs": [fit.window[0]],
            "window_hi_fs": [fit.window[1]],
            "n_points": [fit.n_points],
            "diffusion_coefficient_nm2_per_fs_gamma": [fit.diffusion_coefficient],
            "gamma_exp": [fit.exponent],
        })


def _safe_fwhm(x: np.ndarray, y: np.ndarray) -> float:
    try:
        return fwhm(x, y)
    except ValueError as e:
        logger.warning("no FWHM: %s", e)
        return float("nan")


class SpectraExperiment(Experiment):
    """Ensemble-averaged 2D spectra and the linear absorption."""

    @property
    def name(self) -> str:
        return "spectra"

    def run(self, config: RunConfig, scheduler: EnsembleScheduler) -> ExperimentResult:
        geometry = config.build_geometry()
        bath = config.build_bath()
        p = config.lineshape_params()
        s = config.spectra
        dt = config.integrator.dt_fs

        def task(indices: range):
            grids, excluded = [], {}
            for model, i in zip(realization_models(config, geometry, indices), indices):
                try:
                    grids.append(realization_responses(model, bath, geometry, p, s.t_w_fs, s.t_max_fs, s.step_fs, dt))
                except TrajectoryAborted as e:
                    excluded[i] = str(e)
            if not grids:
                return None, excluded
            return [average_responses([g[w] for g in grids]) for w in range(len(s.t_w_fs))], excluded

        outcome = scheduler.run(task, config.run.ensemble_size)
        if not outcome.payloads:
            raise TrajectoryAborted("every realization was excluded", step=0)

        spectra = []
        for w in range(len(s.t_w_fs)):
            grid = average_responses([batch[w] for batch in outcome.payloads])
            spectra.append(spectrum_2d(grid, TOTAL, config.bath.omega0_cm1, s.padding, s.omega_max_omega0))

        data: Dict[str, Any] = {"spectra": spectra}
        zero = [sp for sp in spectra if sp.t_w == 0.0]
        if zero:
            data["absorption"] = (zero[0].omega_t, linear_absorption(zero[0]))
        return ExperimentResult(self.name, outcome, [None] * config.run.ensemble_size, data)

    def write(self, result: ExperimentResult, writer: OutputWriter, plots: bool = False) -> None:
        spectra = result.data["spectra"]
        frames = []
        for sp in spectra:
            w_tau, w_t = np.meshgrid(sp.omega_tau, sp.omega_t, indexing="ij")
            frames.append(pd.DataFrame({
                "t_w_fs": np.full(w_tau.size, sp.t_w),
                "omega_tau_omega0": w_tau.reshape(-1),
                "omega_t_omega0": w_t.reshape(-1),
                "intensity": sp.intensity.reshape(-1),
            }))
        writer.write_frame("spectrum2d.csv", pd.concat(frames, ignore_index=True))

        rows = []
        for sp in spectra:
            peak_tau, peak_t = peak_position(sp)
            try:
                diag, anti = diagonal_antidiagonal_widths(sp)
            except ValueError as e:
                logger.warning("no peak widths at T_w = %.1f fs: %s", sp.t_w, e)
                diag = anti = float("nan")
            rows.append({
                "t_w_fs": sp.t_w,
                "peak_omega_tau_omega0": peak_tau,
                "peak_omega_t_omega0": peak_t,
                "diagonal_fwhm_omega0": diag,
                "antidiagonal_fwhm_omega0": anti,
            })
        summary = pd.DataFrame(rows)

        absorption = result.data.get("absorption")
        if absorption is not None:
            omega, intensity = absorption
            writer.write_columns("absorption.csv", {"omega_omega0": omega, "intensity": intensity})
            summary["absorption_fwhm_omega0"] = [
                _safe_fwhm(omega, intensity) if row["t_w_fs"] == 0.0 else float("nan") for row in rows
            ]
        writer.write_frame("spectra_summary.csv", summary)

        if plots:
            plt = load_pyplot()
            if plt is None:
                return
            for sp in spectra:
                fig, ax = plt.subplots()
                ax.contourf(sp.omega_t, sp.omega_tau, sp.intensity, levels=30, cmap="RdBu_r")
                ax.set_xlabel(r"$\omega_t / \omega_0$")
                ax.set_ylabel(r"$\omega_\tau / \omega_0$")
                writer.add_plot(f"spectrum2d_tw{sp.t_w:g}.png", fig)
                plt.close(fig)


EXPERIMENT_TYPES = {
    "statics": StaticsExperiment,
    "dynamics": DynamicsExperiment,
    "transfer": TransferExperiment,
    "msd": MsdExperiment,
    "spectra": SpectraExperiment,
}


def make_experiment(name: str) -> Experiment:
    try:
        return EXPERIMENT_TYPES[name]()
    except KeyError:
        raise ConfigError(f"unknown experiment {name!r} (valid: {', '.join(EXPERIMENT_TYPES)})", "run", "experiment")


def run_direct(config: RunConfig, threads: int = 1) -> ExperimentResult:
    """Run an experiment in memory without touching the filesystem."""
    return make_experiment(config.run.experiment).run(config, EnsembleScheduler(threads, config.run.batch_size))


def dump_model(config: RunConfig, writer: OutputWriter, realization: int = 0) -> None:
    """Write K of one realization and the phonon mode table."""
    geometry = config.build_geometry()
    model = realization_models(config, geometry, [realization])[0]
    n = model.n_sites
    rows, cols = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    writer.write_columns("exciton_matrix.csv", {
        "n": rows.reshape(-1),
        "m": cols.reshape(-1),
        "k_cm1": model.k.reshape(-1),
    })
    bath = config.build_bath()
    writer.write_columns("phonon_bath.csv", {
        "q_index": np.arange(bath.n_modes),
        "q_rad": bath.q_grid,
        "omega_cm1": bath.omega_q,
        "g": bath.g_q,
    })
    writer.write_columns("sites.csv", {
        "site": np.arange(n),
        "x_angstrom": geometry.positions[:, 0],
        "y_angstrom": geometry.positions[:, 1],
        "dx": geometry.dipoles[:, 0],
        "dy": geometry.dipoles[:, 1],
        "dz": geometry.dipoles[:, 2],
    })
