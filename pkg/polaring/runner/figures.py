"""
Parameter sweeps behind the standard plots of the toolkit.

Every figure is a list of cells. A cell is a full runner invocation with a
handful of overrides on top of the base configuration, written to its own
subdirectory; the figure then condenses the cell results into its summary
tables. Figures are named fig2 .. fig10 and also answer to a descriptive
alias (fig4 is coherence-grid).
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from polaring.events import EventEmitter
from polaring.model.disorder import DisorderKind, DisorderSpec
from polaring.observables.transport import MEAN_COUPLING_CM1, SteadyStateSummary
from polaring.runner.config import RunConfig
from polaring.runner.ensemble import run_ensemble
from polaring.runner.experiments import ExperimentResult
from polaring.runner.output import FLOAT_FORMAT, MANIFEST_NAME, RunManifest, file_checksum
from polaring.spectroscopy.spectrum import fwhm

logger = logging.getLogger(__name__)

DIAGONAL = DisorderKind.DIAGONAL.value
OFFDIAGONAL = DisorderKind.OFF_DIAGONAL.value
BOTH = DisorderKind.BOTH.value
CLEAN = "clean"
HUANG_RHYS_GRID = (0.0, 0.5, 1.0, 1.5)
SIGMA_OVER_J_GRID = (0.18, 0.55, 0.92, 1.30)
STATICS_SIGMAS = (0.0, 50.0, 100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0, 900.0, 1000.0)
SINK_GAMMA = 0.1
SINK_SITE = 0
INITIAL_SITE = 8


@dataclass(frozen=True)
class FigureCell:
    label: str
    overrides: Dict[str, Any]
    tags: Dict[str, Any] = field(default_factory=dict)

    @property
    def clean(self) -> bool:
        return not self.overrides.get("disorder.sigma_e_cm1") and not self.overrides.get("disorder.sigma_j_cm1")


@dataclass(frozen=True)
class FigureSpec:
    name: str
    alias: str
    description: str
    ensemble_size: int
    cells: Callable[[], List[FigureCell]]
    summarize: Callable[[List[Tuple[FigureCell, ExperimentResult]]], Dict[str, pd.DataFrame]]
    # cell directory shared with other figures over the same grid
    group: Optional[str] = None
    # reads a finished cell back from its run directory
    reuse: Optional[Callable[[Path], Dict[str, Any]]] = None


@dataclass
class FigureBundle:
    name: str
    root: Path
    cells: List[FigureCell]
    manifests: List[Any]
    tables: Dict[str, Path]


def disorder_overrides(kind: str, sigma: float) -> Dict[str, float]:
    spec = DisorderSpec.of_kind(DisorderKind(kind), sigma)
    return {"disorder.sigma_e_cm1": spec.sigma_e, "disorder.sigma_j_cm1": spec.sigma_j}


def _label(*parts: Any) -> str:
    return "_".join(f"{p:g}" if isinstance(p, float) else str(p) for p in parts)


# --- cell grids -------------------------------------------------------------

def _localization_cells() -> List[FigureCell]:
    cells = []
    for kind in (DIAGONAL, OFFDIAGONAL, BOTH):
        for sigma in STATICS_SIGMAS:
            overrides = {"run.experiment": "statics", **disorder_overrides(kind, sigma)}
            cells.append(FigureCell(_label(kind, "sigma", sigma), overrides, {"kind": kind, "sigma_cm1": sigma}))
    return cells


def _dynamics(kind: str, sigma: float, s: float, experiment: str = "dynamics", **extra) -> FigureCell:
    overrides = {
        "run.experiment": experiment,
        "bath.huang_rhys": s,
        "integrator.t_max_fs": 300.0,
        **disorder_overrides(kind, sigma),
        **extra,
    }
    tags = {"kind": kind if sigma else CLEAN, "sigma_cm1": sigma, "huang_rhys": s}
    return FigureCell(_label(tags["kind"], "sigma", sigma, "S", s), overrides, tags)


def _population_cells() -> List[FigureCell]:
    cells = [_dynamics(DIAGONAL, 0.0, s) for s in HUANG_RHYS_GRID]
    for sigma in (100.0, 300.0):
        for kind in (DIAGONAL, OFFDIAGONAL):
            cells.extend(_dynamics(kind, sigma, s) for s in HUANG_RHYS_GRID)
    return cells


def _steady_grid_cells() -> List[FigureCell]:
    cells = []
    for kind in (DIAGONAL, OFFDIAGONAL):
        for ratio in SIGMA_OVER_J_GRID:
            sigma = round(ratio * MEAN_COUPLING_CM1, 6)
            for s in HUANG_RHYS_GRID:
                cell = _dynamics(kind, sigma, s)
                cells.append(FigureCell(cell.label, cell.overrides, {**cell.tags, "sigma_over_J": ratio}))
    return cells


def _transfer(kind: str, sigma: float, s: float) -> FigureCell:
    return _dynamics(
        kind, sigma, s, "transfer",
        **{"sink.gamma_omega0": SINK_GAMMA, "sink.site": SINK_SITE, "initial.site": INITIAL_SITE},
    )


def _sink_transfer_cells() -> List[FigureCell]:
    return [_transfer(kind, 300.0, s) for kind in (DIAGONAL, OFFDIAGONAL, BOTH) for s in HUANG_RHYS_GRID]


def _superradiance_cells() -> List[FigureCell]:
    cells = []
    for sigma in (100.0, 300.0):
        for s in HUANG_RHYS_GRID:
            cell = _dynamics(DIAGONAL, sigma, s, **{"initial.kind": "bright"})
            cells.append(FigureCell("bright_" + cell.label, cell.overrides, {**cell.tags, "family": "superradiance"}))
    for s in HUANG_RHYS_GRID:
        cell = _transfer(DIAGONAL, 300.0, s)
        cells.append(FigureCell("sink_" + cell.label, cell.overrides, {**cell.tags, "family": "momentum"}))
    return cells


def _energy_cells() -> List[FigureCell]:
    return [_dynamics(DIAGONAL, 100.0, s) for s in (0.5, 1.0)]


def _spectra_cells() -> List[FigureCell]:
    base = {"run.experiment": "spectra", "bath.huang_rhys": 0.5}
    cells = []
    for label, kind, sigma in ((CLEAN, DIAGONAL, 0.0), (DIAGONAL, DIAGONAL, 100.0), (OFFDIAGONAL, OFFDIAGONAL, 100.0)):
        tags = {"kind": label, "sigma_cm1": sigma}
        name = label if label == CLEAN else _label(label, "sigma", sigma)
        cells.append(FigureCell(name, {**base, **disorder_overrides(kind, sigma)}, tags))
    return cells


def _msd_cells() -> List[FigureCell]:
    cells = [_dynamics(DIAGONAL, 0.0, s, "msd") for s in HUANG_RHYS_GRID]
    for kind in (DIAGONAL, OFFDIAGONAL):
        for sigma in (100.0, 300.0):
            cells.extend(_dynamics(kind, sigma, s, "msd") for s in HUANG_RHYS_GRID)
    return cells



# --- summaries --------------------------------------------------------------

Results = List[Tuple[FigureCell, ExperimentResult]]


def _rows(results: Results, extract: Callable[[ExperimentResult], Dict[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame([{"cell": cell.label, **cell.tags, **extract(result)} for cell, result in results])


def _long(results: Results, extract: Callable[[ExperimentResult], Dict[str, np.ndarray]]) -> pd.DataFrame:
    frames = []
    for cell, result in results:
        columns = extract(result)
        size = len(next(iter(columns.values())))
        frames.append(pd.DataFrame({"cell": [cell.label] * size, **columns}))
    return pd.concat(frames, ignore_index=True)


def _grid(times: np.ndarray, grid: np.ndarray, index_name: str, value_name: str) -> Dict[str, np.ndarray]:
    n_index, n_times = grid.shape
    return {
        "time_fs": np.repeat(np.asarray(times, dtype=float), n_index),
        index_name: np.tile(np.arange(n_index), n_times),
        value_name: np.asarray(grid, dtype=float).T.reshape(-1),
    }


def _steady(key: str, column: str) -> Callable[[ExperimentResult], Dict[str, float]]:
    def extract(result: ExperimentResult) -> Dict[str, float]:
        steady = result.data.get("steady_state")
        return {column: np.nan if steady is None else getattr(steady, key)}

    return extract


def _load_steady(cell_dir: Path) -> Dict[str, Any]:
    """Steady-state summary of a finished cell, read back from its run directory."""
    row = pd.read_csv(cell_dir / "steady_state.csv").iloc[0]
    summary = SteadyStateSummary(
        float(row["assc_sites"]),
        float(row["ass_ipr_sites"]),
        (float(row["window_lo_fs"]), float(row["window_hi_fs"])),
        float(row["sigma_over_J"]),
    )
    return {"steady_state": summary}


def _localization_summary(results: Results) -> Dict[str, pd.DataFrame]:
    brody = []
    ipr = []
    for cell, result in results:
        for w in result.data["brody_map"]:
            brody.append({
                "cell": cell.label, **cell.tags,
                "window_lo": w.window_lo, "window_hi": w.window_hi,
                "n_spacings": w.n_spacings,
                "beta": np.nan if w.beta is None else w.beta,
                "class": w.classification,
            })
        energy, values, _ = result.data["ipr_vs_energy"]
        ipr.extend({"cell": cell.label, **cell.tags, "energy_cm1": e, "ipr": v} for e, v in zip(energy, values))
    return {"brody_map": pd.DataFrame(brody), "ipr_vs_energy": pd.DataFrame(ipr)}


def _population_summary(results: Results) -> Dict[str, pd.DataFrame]:
    return {
        "populations": _long(results, lambda r: _grid(
            r.data["series"].times, r.data["series"].populations, "site", "population"
        )),
        "xi_n": _long(results, lambda r: _grid(r.data["series"].times, r.data["series"].xi_n, "site", "xi")),
    }


def _coherence_summary(results: Results) -> Dict[str, pd.DataFrame]:
    return {"assc": _rows(results, _steady("assc", "assc_sites"))}


def _ipr_summary(results: Results) -> Dict[str, pd.DataFrame]:
    return {"ass_ipr": _rows(results, _steady("ass_ipr", "ass_ipr_sites"))}


def _sink_transfer_summary(results: Results) -> Dict[str, pd.DataFrame]:
    return {
        "transfer": _rows(results, lambda r: dict(r.data["transfer"])),
        "p_sink": _long(results, lambda r: {
            "time_fs": r.data["series"].times,
            "p_sink": r.data["series"]["p_sink"],
        }),
    }


def _superradiance_summary(results: Results) -> Dict[str, pd.DataFrame]:
    def extract(r: ExperimentResult) -> Dict[str, Any]:
        series = r.data["series"]
        out = {"L_s_initial": float(series["L_s"][0]), "L_s_final": float(series["L_s"][-1])}
        if "transfer" in r.data:
            out["peak_k_rad_final"] = r.data["transfer"]["peak_k_rad_final"]
        return out

    return {
        "superradiance": _rows(results, extract),
        "L_s": _long(results, lambda r: {"time_fs": r.data["series"].times, "L_s": r.data["series"]["L_s"]}),
    }


def _energy_summary(results: Results) -> Dict[str, pd.DataFrame]:
    def drift(r: ExperimentResult) -> Dict[str, float]:
        total = r.data["series"]["e_total"]
        return {"e_total_drift_omega0": float(np.max(np.abs(total - total[0])))}

    return {
        "energy_drift": _rows(results, drift),
        "energies": _long(results, lambda r: {
            "time_fs": r.data["series"].times,
            **{f"{k}_omega0": r.data["series"][k] for k in ("e_ex", "e_bath", "e_int", "e_total")},
        }),
    }


def _spectra_summary(results: Results) -> Dict[str, pd.DataFrame]:
    def extract(r: ExperimentResult) -> Dict[str, float]:
        spectrum = r.data["spectra"][0]
        peak = np.unravel_index(int(np.argmax(spectrum.intensity)), spectrum.intensity.shape)
        out = {
            "peak_omega_tau_omega0": float(spectrum.omega_tau[peak[0]]),
            "peak_omega_t_omega0": float(spectrum.omega_t[peak[1]]),
        }
        if "absorption" in r.data:
            omega, intensity = r.data["absorption"]
            try:
                out["absorption_fwhm_omega0"] = fwhm(omega, intensity)
            except ValueError:
                out["absorption_fwhm_omega0"] = np.nan
        return out

    return {
        "spectra": _rows(results, extract),
        "absorption": _long(results, lambda r: {
            "omega_omega0": r.data["absorption"][0],
            "intensity": r.data["absorption"][1],
        }),
    }


def _msd_summary(results: Results) -> Dict[str, pd.DataFrame]:
    def extract(r: ExperimentResult) -> Dict[str, float]:
        fit = r.data["msd_fit"]
        return {"gamma_exp": fit.exponent, "diffusion_coefficient_nm2_per_fs_gamma": fit.diffusion_coefficient}

    return {
        "msd_fit": _rows(results, extract),
        "msd": _long(results, lambda r: {"time_fs": r.data["series"].times, "msd_nm2": r.data["series"]["msd_nm2"]}),
    }


# fig4 and fig5 read different columns of the same runs
STEADY_GRID = "steady-grid"

FIGURES: Dict[str, FigureSpec] = {
    spec.name: spec
    for spec in (
        FigureSpec(
            "fig2", "localization", "eigenstate IPR and Brody map against disorder", 10_000,
            _localization_cells, _localization_summary,
        ),
        FigureSpec(
            "fig3", "population-maps", "population and displacement maps", 1000,
            _population_cells, _population_summary,
        ),
        FigureSpec(
            "fig4", "coherence-grid", "steady-state coherence size grid", 1000,
            _steady_grid_cells, _coherence_summary, group=STEADY_GRID, reuse=_load_steady,
        ),
        FigureSpec(
            "fig5", "ipr-grid", "steady-state IPR grid", 1000,
            _steady_grid_cells, _ipr_summary, group=STEADY_GRID, reuse=_load_steady,
        ),
        FigureSpec(
            "fig6", "sink-transfer", "phonon-assisted transfer to a sink", 1000,
            _sink_transfer_cells, _sink_transfer_summary,
        ),
        FigureSpec(
            "fig7", "superradiance", "superradiance and momentum populations", 1000,
            _superradiance_cells, _superradiance_summary,
        ),
        FigureSpec("fig8", "energy-components", "energy components", 1000, _energy_cells, _energy_summary),
        FigureSpec("fig9", "spectra-2d", "2D spectra and absorption", 200, _spectra_cells, _spectra_summary),
        FigureSpec("fig10", "msd", "mean squared displacement", 1000, _msd_cells, _msd_summary),
    )
}

FIGURE_ALIASES: Dict[str, str] = {spec.alias: spec.name for spec in FIGURES.values()}


def figure_names() -> List[str]:
    return list(FIGURES)


def resolve_figure(name: str) -> FigureSpec:
    """Figure by its name or its descriptive alias."""
    canonical = FIGURE_ALIASES.get(name, name)
    if canonical not in FIGURES:
        raise ValueError(
            f"unknown figure {name!r}; valid names: {', '.join(FIGURES)} (aliases: {', '.join(FIGURE_ALIASES)})"
        )
    return FIGURES[canonical]


def _reusable(
    cell_dir: Path, config: RunConfig, load: Callable[[Path], Dict[str, Any]]
) -> Optional[Tuple[RunManifest, ExperimentResult]]:
    """A finished run of exactly this config whose files still match their checksums."""
    path = cell_dir / MANIFEST_NAME
    if not path.is_file():
        return None
    try:
        manifest = RunManifest(**json.loads(path.read_text(encoding="utf-8")))
    except (OSError, ValueError, TypeError) as e:
        logger.warning("cannot reuse %s: %s", cell_dir, e)
        return None
    if manifest.config_hash != config.config_hash():
        return None
    for file, checksum in manifest.files.items():
        target = cell_dir / file
        if not target.is_file() or file_checksum(target) != checksum:
            return None
    return manifest, ExperimentResult(manifest.experiment, None, [], load(cell_dir))


def reproduce_figure(
    name: str,
    base: Optional[RunConfig] = None,
    output_dir: Union[str, Path] = "figures",
    ensemble_size: Optional[int] = None,
    threads: Optional[int] = None,
    force: bool = False,
    emitter: Optional[EventEmitter] = None,
) -> FigureBundle:
    """
    Run every cell of a figure and write its summary tables.

    Figures that share a cell grid share its run directories: a cell whose
    manifest matches the config and whose files match their checksums is
    read back instead of run again.

    Args:
        name: One of figure_names(), or its descriptive alias
        base: Configuration the cell overrides apply to (defaults otherwise)
        output_dir: Parent directory; tables go to ``output_dir/name``, cells
            to the shared grid directory where there is one
        ensemble_size: Realizations per disordered cell (figure default otherwise);
            clean cells always run one realization
        threads: Worker count (config / environment otherwise)
        force: Rerun and overwrite existing cell outputs

    Raises:
        ValueError: for an unknown figure name, listing the valid ones
    """
    spec = resolve_figure(name)
    base = base or RunConfig()
    root = Path(output_dir) / spec.name
    cell_root = Path(output_dir) / (spec.group or spec.name)
    size = ensemble_size or spec.ensemble_size

    cells = spec.cells()
    manifests, results = [], []
    for number, cell in enumerate(cells, start=1):
        overrides = dict(cell.overrides)
        overrides["run.ensemble_size"] = 1 if cell.clean else size
        overrides["run.output_dir"] = str(cell_root / cell.label)
        config = base.with_overrides(overrides)
        reused = None
        if spec.reuse is not None and not force:
            reused = _reusable(cell_root / cell.label, config, spec.reuse)
        if reused is not None:
            logger.info("%s cell %d/%d: %s (reused)", spec.name, number, len(cells), cell.label)
            manifest, result = reused
        else:
            logger.info("%s cell %d/%d: %s", spec.name, number, len(cells), cell.label)
            manifest, result = run_ensemble(config, force=force, threads=threads, emitter=emitter)
        manifests.append(manifest)
        results.append((cell, result))

    root.mkdir(parents=True, exist_ok=True)
    tables = {}
    for table, frame in spec.summarize(results).items():
        path = root / f"{spec.name}_{table}.csv"
        frame.to_csv(path, float_format=FLOAT_FORMAT, index=False, lineterminator="\n", encoding="utf-8")
        tables[table] = path
    return FigureBundle(spec.name, root, cells, manifests, tables)
