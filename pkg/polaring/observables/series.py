"""
Time series of every reported observable for one trajectory, and their
ensemble average.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from polaring.dynamics.integrate import EnsembleTrajectory
from polaring.dynamics.state import TrajectorySnapshot
from polaring.model.bath import PhononBath
from polaring.model.exciton import ExcitonMatrix
from polaring.model.geometry import RingGeometry
from polaring.observables.density import (
    DEFAULT_IPR_EXPONENT,
    PRINTED_IPR_EXPONENT,
    coherence_size,
    density_from_arrays,
    inverse_population_ratio,
    momentum_populations,
    superradiance_factor,
)
from polaring.observables.phonons import displacement_from_arrays, energies_from_arrays
from polaring.observables.transport import CHORD, msd_curve, site_distances

SCALAR_KEYS = (
    "L_c",
    "ipr_rho",
    "ipr_rho_printed",
    "L_s",
    "msd_nm2",
    "p_sink",
    "e_ex",
    "e_bath",
    "e_int",
    "e_total",
    "delta_dev",
    "norm",
)


@dataclass(frozen=True)
class ObservableSeries:
    """
    Observables on a shared time grid.

    ``values`` maps each name in SCALAR_KEYS to a length-T array; the grid
    observables (n_k, xi_n, populations) are shaped (N, T).
    """
    times: np.ndarray
    values: Dict[str, np.ndarray]
    n_k: np.ndarray
    xi_n: np.ndarray
    populations: np.ndarray
    sink_open: bool = False
    n_members: int = 1
    meta: Dict[str, float] = field(default_factory=dict)

    @property
    def n_times(self) -> int:
        return self.times.size

    def __getitem__(self, key: str) -> np.ndarray:
        return self.values[key]


def observe_arrays(
    times: np.ndarray,
    alpha: np.ndarray,
    lam: np.ndarray,
    deviation: np.ndarray,
    model: Union[ExcitonMatrix, np.ndarray],
    bath: PhononBath,
    geometry: RingGeometry,
    initial_site: int,
    sink_open: bool = False,
    msd_metric: str = CHORD,
) -> ObservableSeries:
    """Series from recorded arrays alpha (T, N) and lam (T, N, Nq)."""
    if isinstance(model, ExcitonMatrix):
        k, baseline = model.k, model.baseline
    else:
        k, baseline = np.asarray(model, dtype=float), 0.0

    rho = density_from_arrays(alpha, lam)
    norm = np.sum(np.abs(alpha) ** 2, axis=-1)
    populations = np.abs(alpha) ** 2
    e_ex, e_bath, e_int = energies_from_arrays(alpha, lam, k, baseline, bath)

    values = {
        "L_c": coherence_size(rho),
        "ipr_rho": inverse_population_ratio(rho, DEFAULT_IPR_EXPONENT),
        "ipr_rho_printed": inverse_population_ratio(rho, PRINTED_IPR_EXPONENT),
        "L_s": superradiance_factor(rho, geometry.dipoles),
        "msd_nm2": msd_curve(populations.T, site_distances(geometry, initial_site, msd_metric)),
        "p_sink": 1.0 - norm if sink_open else np.zeros_like(norm),
        "e_ex": e_ex,
        "e_bath": e_bath,
        "e_int": e_int,
        "e_total": e_ex + e_bath + e_int,
        "delta_dev": np.asarray(deviation, dtype=float),
        "norm": norm,
    }
    return ObservableSeries(
        times=np.asarray(times, dtype=float),
        values={key: np.asarray(values[key], dtype=float) for key in SCALAR_KEYS},
        n_k=momentum_populations(rho).T,
        xi_n=displacement_from_arrays(alpha, lam).T,
        populations=populations.T,
        sink_open=sink_open,
    )


def observe_trajectory(
    trajectory: Sequence[TrajectorySnapshot],
    model: Union[ExcitonMatrix, np.ndarray],
    bath: PhononBath,
    geometry: RingGeometry,
    initial_site: int,
    sink_open: bool = False,
    msd_metric: str = CHORD,
) -> ObservableSeries:
    return observe_arrays(
        np.array([snap.time for snap in trajectory]),
        np.stack([snap.alpha for snap in trajectory]),
        np.stack([snap.lam for snap in trajectory]),
        np.array([snap.deviation_amplitude for snap in trajectory]),
        model,
        bath,
        geometry,
        initial_site,
        sink_open,
        msd_metric,
    )


def observe_ensemble(
    run: EnsembleTrajectory,
    models: Sequence[ExcitonMatrix],
    bath: PhononBath,
    geometry: RingGeometry,
    initial_site: int,
    sink_open: bool = False,
    msd_metric: str = CHORD,
) -> List[Optional[ObservableSeries]]:
    """One series per batch member in order; aborted members give None."""
    if len(models) != run.n_members:
        raise ValueError(f"{len(models)} models for {run.n_members} trajectories")
    series: List[Optional[ObservableSeries]] = []
    for i, model in enumerate(models):
        if run.aborted[i]:
            series.append(None)
            continue
        series.append(
            observe_arrays(
                run.times,
                run.alpha[i],
                run.lam[i],
                run.deviation[i],
                model,
                bath,
                geometry,
                initial_site,
                sink_open,
                msd_metric,
            )
        )
    return series


def average_series(series: Sequence[ObservableSeries]) -> ObservableSeries:
    """
    Member-weighted mean, accumulated in the given order.

    Averages of averages stay exact: each input carries the number of
    trajectories it already represents.

    Raises:
        ValueError: if the list is empty or the time grids differ
    """
    if not series:
        raise ValueError("cannot average an empty list of series")
    first = series[0]
    for other in series[1:]:
        if other.times.shape != first.times.shape or not np.allclose(other.times, first.times):
            raise ValueError("series do not share a time grid")

    total = sum(s.n_members for s in series)
    values = {key: np.zeros_like(first.values[key]) for key in first.values}
    n_k = np.zeros_like(first.n_k)
    xi_n = np.zeros_like(first.xi_n)
    populations = np.zeros_like(first.populations)
    for s in series:
        w = s.n_members / total
        for key in values:
            values[key] += w * s.values[key]
        n_k += w * s.n_k
        xi_n += w * s.xi_n
        populations += w * s.populations

    return ObservableSeries(
        times=first.times,
        values=values,
        n_k=n_k,
        xi_n=xi_n,
        populations=populations,
        sink_open=any(s.sink_open for s in series),
        n_members=total,
        meta=dict(first.meta),
    )
